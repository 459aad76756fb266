//! Holevo variance with an explicit infinite value.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Serialize, Serializer};

use crate::scalar::Real;

/// `V_H = μ^{-2} − 1`; `Infinite` when the sharpness is zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Variance<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Variance<T> {
    /// Holevo variance from a sharpness in `[0, 1]`.
    pub fn from_sharpness(mu: T) -> Self {
        if mu > T::zero() {
            Variance::Finite(mu.powi(-2) - T::one())
        } else {
            Variance::Infinite
        }
    }

    /// Holevo variance from `μ` and an accurately computed `1 − μ`, avoiding
    /// cancellation when `μ` is close to 1.
    pub fn from_sharpness_deficit(mu: T, one_minus_mu: T) -> Self {
        if mu > T::zero() {
            Variance::Finite(one_minus_mu * (T::one() + mu) / (mu * mu))
        } else {
            Variance::Infinite
        }
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Variance::Finite(v) => Some(v),
            Variance::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Variance::Infinite)
    }

    /// Value as a float, `+∞` for the infinite case.
    pub fn to_float(self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }

    pub fn scaled(self, factor: T) -> Self {
        match self {
            Variance::Finite(v) => Variance::Finite(v * factor),
            Variance::Infinite => Variance::Infinite,
        }
    }
}

impl<T: Real> fmt::Display for Variance<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variance::Finite(v) => write!(f, "{v}"),
            Variance::Infinite => f.write_str("inf"),
        }
    }
}

impl<T: Real> Serialize for Variance<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Variance::Finite(v) => s.serialize_f64(v.to_f64().unwrap_or(f64::NAN)),
            Variance::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de, T: Real> serde::Deserialize<'de> for Variance<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(std::marker::PhantomData<T>);

        impl<T: Real> Visitor<'_> for V<T> {
            type Value = Variance<T>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                T::from_f64(v).map(Variance::Finite).ok_or_else(|| E::custom("out of range"))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "inf" {
                    Ok(Variance::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        d.deserialize_any(V(std::marker::PhantomData))
    }
}

/// Serde adapter for `f64` fields that may be infinite: non-finite values
/// serialize as the string `"inf"`.
pub mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Variance;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Variance::<f64>::deserialize(d)?.to_float())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sharpness_is_infinite() {
        assert_eq!(Variance::from_sharpness(0.0f64), Variance::Infinite);
        assert_eq!(Variance::from_sharpness(1.0f64), Variance::Finite(0.0));
        assert_eq!(Variance::<f64>::Infinite.to_string(), "inf");
    }

    #[test]
    fn deficit_form_agrees() {
        let mu = 0.75f64;
        let a = Variance::from_sharpness(mu).finite().unwrap();
        let b = Variance::from_sharpness_deficit(mu, 1.0 - mu).finite().unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
