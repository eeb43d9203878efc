//! `kind:key=value,key=value` spec strings shared by the CLI grammars.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) struct SpecParams<'a> {
    spec: &'a str,
    pub kind: &'a str,
    values: BTreeMap<&'a str, &'a str>,
}

impl<'a> SpecParams<'a> {
    pub fn parse(spec: &'a str) -> Result<Self> {
        let (kind, rest) = match spec.split_once(':') {
            Some((k, r)) => (k, r),
            None => (spec, ""),
        };
        if kind.is_empty() {
            return Err(Error::spec(spec, "missing kind"));
        }
        let mut values = BTreeMap::new();
        for item in rest.split(',').filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::spec(spec, format!("expected key=value, got `{item}`")))?;
            if values.insert(key, value).is_some() {
                return Err(Error::spec(spec, format!("duplicate key `{key}`")));
            }
        }
        Ok(SpecParams { spec, kind, values })
    }

    pub fn required<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.optional(key)?
            .ok_or_else(|| Error::spec(self.spec, format!("missing `{key}`")))
    }

    pub fn optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::spec(self.spec, format!("bad value `{raw}` for `{key}`"))),
        }
    }

    pub fn flag(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.optional::<u8>(key)? {
            None => Ok(default),
            Some(0) => Ok(false),
            Some(1) => Ok(true),
            Some(v) => Err(Error::spec(self.spec, format!("`{key}` must be 0 or 1, got {v}"))),
        }
    }

    pub fn raw(&mut self, key: &str) -> Option<&'a str> {
        self.values.remove(key)
    }

    pub fn error(&self, reason: impl Into<String>) -> Error {
        Error::spec(self.spec, reason)
    }

    /// Rejects keys nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.values.keys().next() {
            Some(k) => Err(Error::spec(self.spec, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}
