//! Four-scope attribute access.
//!
//! Turn and session values live in the session; user and community values
//! live in a [`ProfileStore`] keyed by user id and community namespace.
//! Unset attributes read as their declared default, undeclared ones as null.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{AttributeRef, AttributeView, Scope};
use crate::store::{AttributeChange, ProfileStore, StoreError};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum AttributeError {
    #[error("attribute {0} is not declared")]
    Undeclared(AttributeRef),
    #[error("could not persist attribute: {0}")]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocalAttributes {
    pub turn: BTreeMap<String, Value>,
    pub session: BTreeMap<String, Value>,
}

impl LocalAttributes {
    pub fn reset_turn(&mut self) {
        self.turn.clear();
    }
}

/// Everything needed to resolve attributes for one session.
pub struct AttributeContext<'a> {
    pub decls: &'a BTreeMap<AttributeRef, Value>,
    pub profiles: &'a dyn ProfileStore,
    pub user_id: &'a str,
    pub community: &'a str,
}

impl AttributeContext<'_> {
    fn default_of(&self, r: &AttributeRef) -> Value {
        self.decls.get(r).cloned().unwrap_or_default()
    }

    fn profile_key(&self, scope: Scope) -> &str {
        match scope {
            Scope::User => self.user_id,
            _ => self.community,
        }
    }

    pub fn get(&self, local: &LocalAttributes, r: &AttributeRef) -> Value {
        let stored = match r.scope {
            Scope::Turn => local.turn.get(&r.name).cloned(),
            Scope::Session => local.session.get(&r.name).cloned(),
            Scope::User | Scope::Community => self.profiles.get_attribute(r.scope, self.profile_key(r.scope), &r.name),
        };
        stored.unwrap_or_else(|| self.default_of(r))
    }

    /// Writes a declared attribute and returns the change.
    pub fn set(&self, local: &mut LocalAttributes, r: &AttributeRef, value: Value) -> Result<AttributeChange, AttributeError> {
        if !self.decls.contains_key(r) {
            return Err(AttributeError::Undeclared(r.clone()));
        }
        let old = self.get(local, r);
        match r.scope {
            Scope::Turn => {
                local.turn.insert(r.name.clone(), value.clone());
            }
            Scope::Session => {
                local.session.insert(r.name.clone(), value.clone());
            }
            Scope::User | Scope::Community => {
                self.profiles
                    .set_attribute(r.scope, self.profile_key(r.scope), &r.name, value.clone())?;
            }
        }
        Ok(AttributeChange {
            scope: r.scope,
            name: r.name.clone(),
            old,
            new: value,
        })
    }

    pub fn view<'b>(&'b self, local: &'b LocalAttributes) -> AttributeReader<'b> {
        AttributeReader { ctx: self, local }
    }
}

/// Read-only view used by conditions and templates.
pub struct AttributeReader<'a> {
    ctx: &'a AttributeContext<'a>,
    local: &'a LocalAttributes,
}

impl AttributeView for AttributeReader<'_> {
    fn get(&self, reference: &AttributeRef) -> Value {
        self.ctx.get(self.local, reference)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::MemoryStore;

    fn decls() -> BTreeMap<AttributeRef, Value> {
        [
            ("turn.x", Value::Int(0)),
            ("session.n", Value::Int(1)),
            ("user.name", Value::Null),
            ("community.motd", Value::from("none")),
        ]
        .into_iter()
        .map(|(k, v)| (k.parse().unwrap(), v))
        .collect()
    }

    #[test]
    fn defaults_writes_and_undeclared() {
        let decls = decls();
        let store = MemoryStore::new();
        let ctx = AttributeContext {
            decls: &decls,
            profiles: &store,
            user_id: "u",
            community: "c",
        };
        let mut local = LocalAttributes::default();
        let x: AttributeRef = "turn.x".parse().unwrap();
        assert_eq!(ctx.get(&local, &x), Value::Int(0));
        let change = ctx.set(&mut local, &x, Value::Int(5)).unwrap();
        assert_eq!((change.old, change.new), (Value::Int(0), Value::Int(5)));
        local.reset_turn();
        assert_eq!(ctx.get(&local, &x), Value::Int(0));
        let missing: AttributeRef = "session.missing".parse().unwrap();
        assert_eq!(ctx.get(&local, &missing), Value::Null);
        assert!(matches!(ctx.set(&mut local, &missing, Value::Int(1)), Err(AttributeError::Undeclared(_))));
    }

    #[test]
    fn user_and_community_keys() {
        let decls = decls();
        let store = MemoryStore::new();
        let ctx = |user: &'static str| AttributeContext {
            decls: &decls,
            profiles: &store,
            user_id: user,
            community: "c",
        };
        let mut local = LocalAttributes::default();
        let name: AttributeRef = "user.name".parse().unwrap();
        let motd: AttributeRef = "community.motd".parse().unwrap();
        ctx("ann").set(&mut local, &name, "Ann".into()).unwrap();
        ctx("ann").set(&mut local, &motd, "hi".into()).unwrap();
        assert_eq!(ctx("bob").get(&local, &name), Value::Null);
        assert_eq!(ctx("bob").get(&local, &motd), Value::from("hi"));
    }
}
