use std::fmt;
use std::str::FromStr;

use crate::bignat::BigNat;
use crate::error::Error;

/// Unary predicates over population sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// `m ≥ k`
    Threshold(BigNat),
    /// `lo ≤ m ≤ hi`
    Range(BigNat, BigNat),
    /// `m ≥ k0 ∧ inner(m − k0)`
    Shifted(u64, Box<Predicate>),
}

impl Predicate {
    pub fn threshold(k: impl Into<BigNat>) -> Self {
        Predicate::Threshold(k.into())
    }

    pub fn range(lo: impl Into<BigNat>, hi: impl Into<BigNat>) -> Self {
        Predicate::Range(lo.into(), hi.into())
    }

    pub fn shifted(k0: u64, inner: Predicate) -> Self {
        Predicate::Shifted(k0, Box::new(inner))
    }

    pub fn eval(&self, m: &BigNat) -> bool {
        match self {
            Predicate::Threshold(k) => m >= k,
            Predicate::Range(lo, hi) => lo <= m && m <= hi,
            Predicate::Shifted(k0, inner) => {
                let k0 = BigNat::from(*k0);
                m >= &k0 && inner.eval(&(m - &k0))
            }
        }
    }

    pub fn eval_u64(&self, m: u64) -> bool {
        self.eval(&BigNat::from(m))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Threshold(k) => write!(f, "threshold:{k}"),
            Predicate::Range(lo, hi) => write!(f, "range:{lo}:{hi}"),
            Predicate::Shifted(k0, inner) => write!(f, "shifted:{k0}:{inner}"),
        }
    }
}

impl FromStr for Predicate {
    type Err = Error;

    /// Parses `threshold:k`, `range:lo:hi` or `shifted:k0:<predicate>`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Parse(format!("cannot parse predicate `{s}`"));
        let num = |t: &str| t.parse::<BigNat>().map_err(|_| bad());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "threshold" => Ok(Predicate::Threshold(num(rest)?)),
            "range" => {
                let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Predicate::Range(num(lo)?, num(hi)?))
            }
            "shifted" => {
                let (k0, inner) = rest.split_once(':').ok_or_else(bad)?;
                let k0 = k0.parse::<u64>().map_err(|_| bad())?;
                Ok(Predicate::shifted(k0, inner.parse()?))
            }
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!(Predicate::threshold(10u32).eval_u64(10));
        assert!(!Predicate::range(4u32, 7u32).eval_u64(8));
        assert!(!Predicate::shifted(3, Predicate::threshold(2u32)).eval_u64(4));
        assert!(Predicate::shifted(3, Predicate::threshold(2u32)).eval_u64(5));
    }

    #[test]
    fn shifted_matches_definition_exhaustively() {
        let inner = Predicate::range(2u32, 9u32);
        for k0 in [0u64, 1, 7, 12] {
            let p = Predicate::shifted(k0, inner.clone());
            for m in 0..=10_000u64 {
                let expect = m >= k0 && inner.eval_u64(m - k0);
                assert_eq!(p.eval_u64(m), expect, "k0={k0} m={m}");
            }
        }
    }

    #[test]
    fn parse_and_print() {
        for s in ["threshold:10", "range:4:7", "shifted:12:threshold:2", "shifted:3:shifted:1:range:0:5"] {
            let p: Predicate = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("thresh:3".parse::<Predicate>().is_err());
        assert!("range:4".parse::<Predicate>().is_err());
    }
}
