//! Routing protocol implementations and the name-keyed registry that the
//! runner uses to pick one per scenario.

pub mod aodv;
pub mod aomdv;
pub mod dsr;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::config::ConfigError;
use crate::routing::{RoutingParams, RoutingProtocol};
use crate::sim::SimTime;
use crate::NodeId;

/// Builds one protocol instance per node.
pub type NodeBuilder = Arc<dyn Fn(NodeId, &RoutingParams) -> Box<dyn RoutingProtocol> + Send + Sync>;

pub trait ProtocolFactory: Send + Sync {
    fn name(&self) -> &'static str;

    /// Validates the `<name>.*` overrides and returns a per-node builder.
    fn builder(&self, overrides: &BTreeMap<String, String>) -> Result<NodeBuilder, Vec<ConfigError>>;
}

#[derive(Clone)]
pub struct ProtocolRegistry {
    factories: BTreeMap<&'static str, Arc<dyn ProtocolFactory>>,
}

impl ProtocolRegistry {
    pub fn empty() -> Self {
        ProtocolRegistry {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, factory: Arc<dyn ProtocolFactory>) {
        self.factories.insert(factory.name(), factory);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn ProtocolFactory>> {
        self.factories.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }
}

impl Default for ProtocolRegistry {
    fn default() -> Self {
        let mut r = ProtocolRegistry::empty();
        r.register(Arc::new(aodv::AodvFactory));
        r.register(Arc::new(dsr::DsrFactory));
        r.register(Arc::new(aomdv::AomdvFactory));
        r
    }
}

/// Typed reader over one protocol's override namespace. Unknown keys in the
/// namespace are reported by [`Overrides::finish`].
pub(crate) struct Overrides<'a> {
    ns: &'static str,
    map: &'a BTreeMap<String, String>,
    used: BTreeSet<String>,
    errors: Vec<ConfigError>,
}

impl<'a> Overrides<'a> {
    pub fn new(ns: &'static str, map: &'a BTreeMap<String, String>) -> Self {
        Overrides {
            ns,
            map,
            used: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<(String, &'a str)> {
        let full = format!("{}.{}", self.ns, key);
        let v = self.map.get(&full)?;
        self.used.insert(full.clone());
        Some((full, v.as_str()))
    }

    pub fn u32(&mut self, key: &str, default: u32) -> u32 {
        match self.raw(key) {
            None => default,
            Some((field, v)) => v.parse().unwrap_or_else(|_| {
                self.errors
                    .push(ConfigError::new(field, format!("expected a non-negative integer, got `{v}`")));
                default
            }),
        }
    }

    pub fn secs(&mut self, key: &str, default: SimTime) -> SimTime {
        match self.raw(key) {
            None => default,
            Some((field, v)) => match v.parse::<f64>() {
                Ok(s) if s >= 0.0 && s.is_finite() => SimTime::from_secs_f64(s),
                _ => {
                    self.errors
                        .push(ConfigError::new(field, format!("expected seconds >= 0, got `{v}`")));
                    default
                }
            },
        }
    }

    pub fn bool(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some((field, v)) => v.parse().unwrap_or_else(|_| {
                self.errors
                    .push(ConfigError::new(field, format!("expected true or false, got `{v}`")));
                default
            }),
        }
    }

    pub fn finish(mut self) -> Result<(), Vec<ConfigError>> {
        let prefix = format!("{}.", self.ns);
        for key in self.map.keys().filter(|k| k.starts_with(&prefix)) {
            if !self.used.contains(key) {
                self.errors.push(ConfigError::new(key.clone(), "unknown key".to_string()));
            }
        }
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(self.errors)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_protocols_registered() {
        let r = ProtocolRegistry::default();
        assert_eq!(r.names().collect::<Vec<_>>(), ["aodv", "aomdv", "dsr"]);
        for name in ["aodv", "dsr", "aomdv"] {
            let b = r.get(name).unwrap().builder(&BTreeMap::new()).unwrap();
            assert_eq!(b(0, &RoutingParams::default()).name(), name);
        }
        assert!(r.get("olsr").is_none());
    }

    #[test]
    fn overrides_reject_unknown_and_malformed() {
        let mut map = BTreeMap::new();
        map.insert("aodv.rreq_retries".to_string(), "x".to_string());
        map.insert("aodv.bogus".to_string(), "1".to_string());
        let errs = ProtocolRegistry::default().get("aodv").unwrap().builder(&map).err().unwrap();
        let fields: Vec<_> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, ["aodv.rreq_retries", "aodv.bogus"]);
    }
}
