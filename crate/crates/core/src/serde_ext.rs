//! JSON encoding of extended reals: finite values as numbers, `+inf`/`-inf`
//! as the strings `"inf"`/`"-inf"`; `null` reads as `-inf`.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ext(pub f64);

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Ext;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number, \"inf\", \"-inf\" or null")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Ext, E> {
                Ok(Ext(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Ext, E> {
                Ok(Ext(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Ext, E> {
                Ok(Ext(v as f64))
            }
            fn visit_unit<E: de::Error>(self) -> Result<Ext, E> {
                Ok(Ext(f64::NEG_INFINITY))
            }
            fn visit_none<E: de::Error>(self) -> Result<Ext, E> {
                Ok(Ext(f64::NEG_INFINITY))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Ext, E> {
                match v {
                    "inf" | "+inf" | "Infinity" => Ok(Ext(f64::INFINITY)),
                    "-inf" | "-Infinity" => Ok(Ext(f64::NEG_INFINITY)),
                    _ => Err(E::custom(format!("unexpected string {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

pub fn wrap(xs: &[f64]) -> Vec<Ext> {
    xs.iter().map(|&x| Ext(x)).collect()
}

pub fn unwrap(xs: &[Ext]) -> Vec<f64> {
    xs.iter().map(|x| x.0).collect()
}

/// `#[serde(with = "serde_ext::vec")]` for `Vec<f64>` fields that may hold infinities.
pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        wrap(xs).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(unwrap(&Vec::<Ext>::deserialize(d)?))
    }
}
