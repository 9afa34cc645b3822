//! The closed annotation schema: concept types, directed relation types with
//! argument constraints, and attribute families.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CONCEPT_COUNT: usize = 17;
pub const RELATION_COUNT: usize = 9;

const SHIPPED: &str = include_str!("../assets/schema.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptGroup {
    Central,
    Relating,
    Specifying,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptType {
    pub name: String,
    pub group: ConceptGroup,
}

/// A relation signature. `None` for an argument means any concept type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationType {
    pub name: String,
    pub arg1: Option<Vec<String>>,
    pub arg2: Option<Vec<String>>,
}

impl RelationType {
    pub fn accepts(&self, arg1: &str, arg2: &str) -> bool {
        let ok = |set: &Option<Vec<String>>, ty: &str| match set {
            None => true,
            Some(types) => types.iter().any(|t| t == ty),
        };
        ok(&self.arg1, arg1) && ok(&self.arg2, arg2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttributeFamily {
    DocTime,
    LevelOfTruth,
}

impl AttributeFamily {
    pub const ALL: [AttributeFamily; 2] = [AttributeFamily::DocTime, AttributeFamily::LevelOfTruth];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeFamily::DocTime => "DocTime",
            AttributeFamily::LevelOfTruth => "LevelOfTruth",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "DocTime" => Some(AttributeFamily::DocTime),
            "LevelOfTruth" => Some(AttributeFamily::LevelOfTruth),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaDefinition {
    concepts: Vec<ConceptType>,
    relations: Vec<RelationType>,
    attributes: BTreeMap<AttributeFamily, Vec<String>>,
}

#[derive(Deserialize)]
struct RawSchema {
    concepts: RawConcepts,
    relations: Vec<RawRelation>,
    attributes: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct RawConcepts {
    central: Vec<String>,
    relating: Vec<String>,
    specifying: Vec<String>,
}

#[derive(Deserialize)]
struct RawRelation {
    name: String,
    arg1: Vec<String>,
    arg2: Vec<String>,
}

impl SchemaDefinition {
    /// The schema shipped with the crate (17 concepts, 9 relations).
    pub fn shipped() -> Self {
        Self::from_toml(SHIPPED).expect("shipped schema is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawSchema = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;

        let mut concepts = Vec::new();
        for (group, names) in [
            (ConceptGroup::Central, raw.concepts.central),
            (ConceptGroup::Relating, raw.concepts.relating),
            (ConceptGroup::Specifying, raw.concepts.specifying),
        ] {
            for name in names {
                if concepts.iter().any(|c: &ConceptType| c.name == name) {
                    return Err(Error::Schema(format!("duplicate concept type {name}")));
                }
                concepts.push(ConceptType { name, group });
            }
        }
        if concepts.len() != CONCEPT_COUNT {
            return Err(Error::Schema(format!(
                "expected {CONCEPT_COUNT} concept types, found {}",
                concepts.len()
            )));
        }

        let resolve = |args: Vec<String>, rel: &str| -> Result<Option<Vec<String>>> {
            if args.iter().any(|a| a == "*") {
                return Ok(None);
            }
            for a in &args {
                if !concepts.iter().any(|c| &c.name == a) {
                    return Err(Error::Schema(format!(
                        "relation {rel} references undeclared concept type {a}"
                    )));
                }
            }
            Ok(Some(args))
        };
        let mut relations = Vec::new();
        for r in raw.relations {
            if relations.iter().any(|x: &RelationType| x.name == r.name) {
                return Err(Error::Schema(format!("duplicate relation type {}", r.name)));
            }
            let arg1 = resolve(r.arg1, &r.name)?;
            let arg2 = resolve(r.arg2, &r.name)?;
            relations.push(RelationType {
                name: r.name,
                arg1,
                arg2,
            });
        }
        if relations.len() != RELATION_COUNT {
            return Err(Error::Schema(format!(
                "expected {RELATION_COUNT} relation types, found {}",
                relations.len()
            )));
        }

        let mut attributes = BTreeMap::new();
        for (name, values) in raw.attributes {
            let family = AttributeFamily::parse(&name)
                .ok_or_else(|| Error::Schema(format!("unknown attribute family {name}")))?;
            if values.is_empty() {
                return Err(Error::Schema(format!("attribute family {name} has no values")));
            }
            attributes.insert(family, values);
        }
        for family in AttributeFamily::ALL {
            if !attributes.contains_key(&family) {
                return Err(Error::Schema(format!("attribute family {family} missing")));
            }
        }

        Ok(SchemaDefinition {
            concepts,
            relations,
            attributes,
        })
    }

    pub fn concepts(&self) -> &[ConceptType] {
        &self.concepts
    }

    pub fn concept_names(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(|c| c.name.as_str())
    }

    pub fn concept_index(&self, name: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c.name == name)
    }

    pub fn relations(&self) -> &[RelationType] {
        &self.relations
    }

    pub fn relation(&self, name: &str) -> Option<&RelationType> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn attribute_values(&self, family: AttributeFamily) -> &[String] {
        &self.attributes[&family]
    }

    /// True if some relation type admits `(arg1, arg2)` in this order.
    pub fn any_relation_accepts(&self, arg1: &str, arg2: &str) -> bool {
        self.relations.iter().any(|r| r.accepts(arg1, arg2))
    }

    /// Stable digest of the concept and relation vocabularies.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.concepts {
            h.update(b"C\t");
            h.update(c.name.as_bytes());
            h.update(b"\n");
        }
        for r in &self.relations {
            h.update(b"R\t");
            h.update(r.name.as_bytes());
            for args in [&r.arg1, &r.arg2] {
                h.update(b"\t");
                match args {
                    None => h.update(b"*"),
                    Some(v) => h.update(v.join(",").as_bytes()),
                }
            }
            h.update(b"\n");
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_counts() {
        let s = SchemaDefinition::shipped();
        assert_eq!(s.concepts().len(), 17);
        assert_eq!(s.relations().len(), 9);
        let groups = |g| s.concepts().iter().filter(|c| c.group == g).count();
        assert_eq!(groups(ConceptGroup::Central), 3);
        assert_eq!(groups(ConceptGroup::Relating), 8);
        assert_eq!(groups(ConceptGroup::Specifying), 6);
        assert_eq!(s.attribute_values(AttributeFamily::DocTime).len(), 3);
        assert_eq!(s.attribute_values(AttributeFamily::LevelOfTruth).len(), 4);
    }

    #[test]
    fn signatures() {
        let s = SchemaDefinition::shipped();
        let dosing = s.relation("Has_dosing").unwrap();
        assert!(dosing.accepts("Medication", "Dosing"));
        assert!(!dosing.accepts("Dosing", "Medication"));
        assert!(s.relation("Has_state").unwrap().accepts("Person", "State_of_health"));
    }

    #[test]
    fn undeclared_argument_rejected() {
        let text = SHIPPED.replace("arg2 = [\"Dosing\"]", "arg2 = [\"Dose\"]");
        let err = SchemaDefinition::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("undeclared concept type Dose"));
    }

    #[test]
    fn fingerprint_tracks_vocabulary() {
        let a = SchemaDefinition::shipped();
        let b = SchemaDefinition::from_toml(&SHIPPED.replace("\"Person\"", "\"Human\"")).unwrap();
        assert_eq!(a.fingerprint(), SchemaDefinition::shipped().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
