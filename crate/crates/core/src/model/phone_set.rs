use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Ordered phone inventory; column `i` of a logit matrix belongs to
/// `symbols()[i]`.
#[derive(Debug, Clone)]
pub struct PhoneSet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl PhoneSet {
    pub fn new<I, S>(symbols: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(ModelError::EmptyPhoneSet);
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(ModelError::DuplicatePhone(s.clone()));
            }
        }
        Ok(Self { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, i: usize) -> Option<&str> {
        self.symbols.get(i).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

impl PartialEq for PhoneSet {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

impl Eq for PhoneSet {}

impl Serialize for PhoneSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.symbols.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhoneSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let symbols = Vec::<String>::deserialize(d)?;
        Self::new(symbols).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijection() {
        let p = PhoneSet::new(["a", "e", "rr"]).unwrap();
        for (i, s) in p.symbols().iter().enumerate() {
            assert_eq!(p.index_of(s), Some(i));
            assert_eq!(p.symbol(i), Some(s.as_str()));
        }
        assert_eq!(p.index_of("x"), None);
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        assert_eq!(
            PhoneSet::new(Vec::<String>::new()),
            Err(ModelError::EmptyPhoneSet)
        );
        assert_eq!(
            PhoneSet::new(["a", "b", "a"]),
            Err(ModelError::DuplicatePhone("a".into()))
        );
        assert!(serde_json::from_str::<PhoneSet>(r#"["a","a"]"#).is_err());
    }
}
