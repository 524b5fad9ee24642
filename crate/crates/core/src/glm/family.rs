use serde::{Deserialize, Serialize};

/// Response family of the working GLM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Identity link, `mu(z) = z`.
    Gaussian,
    /// Logistic link, `mu(z) = 1 / (1 + exp(-z))`.
    Binomial,
}

impl Family {
    /// Inverse link.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Binomial => logistic(eta),
        }
    }

    /// Derivative of the inverse link.
    pub fn mean_derivative(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => {
                let m = logistic(eta);
                m * (1.0 - m)
            }
        }
    }

    /// Unit deviance contribution of one observation.
    pub fn unit_deviance(self, y: f64, mu: f64) -> f64 {
        match self {
            Family::Gaussian => (y - mu) * (y - mu),
            Family::Binomial => {
                let m = mu.clamp(1e-10, 1.0 - 1e-10);
                -2.0 * (y * m.ln() + (1.0 - y) * (1.0 - m).ln())
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            other => Err(format!("unknown family '{other}'")),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Numerically stable logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_finite_differences() {
        let step = 1e-6;
        for fam in [Family::Gaussian, Family::Binomial] {
            for &z in &[-6.0, -1.3, 0.0, 0.4, 2.5, 8.0] {
                let fd = (fam.mean(z + step) - fam.mean(z - step)) / (2.0 * step);
                let exact = fam.mean_derivative(z);
                assert!(
                    ((fd - exact) / exact).abs() < 1e-6,
                    "{fam} at {z}: fd {fd} exact {exact}"
                );
            }
        }
    }

    #[test]
    fn logistic_is_stable_in_the_tails() {
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
        assert!((logistic(0.0) - 0.5).abs() < 1e-16);
    }
}
