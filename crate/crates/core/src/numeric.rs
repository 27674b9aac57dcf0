//! Small numeric helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<T: IntoIterator<Item = f64>>(iter: T) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Real number stored as sign and natural log of the magnitude, used where
/// products of weights leave the `f64` exponent range.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogReal {
    pub negative: bool,
    pub ln_abs: f64,
}

impl LogReal {
    pub fn from_f64(x: f64) -> Option<Self> {
        if x == 0.0 || !x.is_finite() {
            return None;
        }
        Some(Self {
            negative: x < 0.0,
            ln_abs: x.abs().ln(),
        })
    }

    /// Multiply by `exp(ln_factor)` and return the plain value (may underflow to 0).
    pub fn scaled(self, ln_factor: f64) -> f64 {
        let m = (self.ln_abs + ln_factor).exp();
        if self.negative {
            -m
        } else {
            m
        }
    }

    pub fn to_f64(self) -> f64 {
        self.scaled(0.0)
    }
}
