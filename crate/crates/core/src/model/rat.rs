use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// Exact rational number kept in lowest terms with a positive denominator.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rat(Ratio<i128>);

impl Rat {
    pub fn new(num: i64, den: i64) -> Result<Self, ModelError> {
        if den == 0 {
            return Err(ModelError::MalformedRational { num, den });
        }
        Ok(Rat(Ratio::new(num as i128, den as i128)))
    }

    pub fn from_int(v: i64) -> Self {
        Rat(Ratio::from_integer(v as i128))
    }

    pub fn zero() -> Self {
        Rat(Ratio::zero())
    }

    pub fn one() -> Self {
        Rat(Ratio::one())
    }

    pub fn half() -> Self {
        Rat(Ratio::new(1, 2))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// `count > self * n`, decided on integers.
    pub fn exceeded_by(&self, count: usize, n: usize) -> bool {
        (count as i128) * self.denom() > self.numer() * (n as i128)
    }

    /// Smallest integer count strictly above `self * n`.
    pub fn min_count_above(&self, n: usize) -> usize {
        let prod = self.numer() * n as i128;
        let d = self.denom();
        let floor = prod.div_euclid(d);
        (floor + 1).max(0) as usize
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rat {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::RationalSyntax(s.to_string());
        match s.split_once('/') {
            Some((n, d)) => {
                let n: i64 = n.trim().parse().map_err(|_| bad())?;
                let d: i64 = d.trim().parse().map_err(|_| bad())?;
                Rat::new(n, d)
            }
            None => Ok(Rat::from_int(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, o: Rat) -> Rat {
        Rat(self.0 + o.0)
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, o: Rat) -> Rat {
        Rat(self.0 - o.0)
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, o: Rat) -> Rat {
        Rat(self.0 * o.0)
    }
}

impl Div for Rat {
    type Output = Rat;
    fn div(self, o: Rat) -> Rat {
        Rat(self.0 / o.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

/// Threshold constant of an instruction slot or predicate entry.
///
/// `Absent` stands below every present value, zero included.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Threshold {
    Absent,
    Present(Rat),
}

impl Threshold {
    pub fn is_present(&self) -> bool {
        matches!(self, Threshold::Present(_))
    }

    pub fn value(&self) -> Option<Rat> {
        match self {
            Threshold::Absent => None,
            Threshold::Present(r) => Some(*r),
        }
    }
}

impl PartialOrd for Threshold {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Threshold {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Threshold::Absent, Threshold::Absent) => Ordering::Equal,
            (Threshold::Absent, Threshold::Present(_)) => Ordering::Less,
            (Threshold::Present(_), Threshold::Absent) => Ordering::Greater,
            (Threshold::Present(a), Threshold::Present(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Absent => write!(f, "-1"),
            Threshold::Present(r) => write!(f, "{r}"),
        }
    }
}

impl From<Rat> for Threshold {
    fn from(r: Rat) -> Self {
        Threshold::Present(r)
    }
}

pub fn rat(num: i64, den: i64) -> Result<Rat, ModelError> {
    Rat::new(num, den)
}

pub fn threshold_ge(a: Threshold, b: Threshold) -> bool {
    a >= b
}
