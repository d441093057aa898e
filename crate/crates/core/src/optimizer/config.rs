use serde::{Deserialize, Serialize};

use crate::error::{Result, SrtError};
use crate::model::{Regularization, TreeTopology, MAX_DEPTH};

/// Hyperparameters of the decomposition training algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub depth: usize,
    pub mu: f64,
    /// `None` selects `2 / (p |tau_B|)`.
    pub lambda_omega: Option<f64>,
    /// `None` selects `2 / (p |tau_L|)`.
    pub lambda_beta: Option<f64>,
    pub eps1_0: f64,
    pub eps2_0: f64,
    pub eps3_0: f64,
    pub zeta: f64,
    pub theta_omega: f64,
    pub theta_beta: f64,
    pub upsilon: f64,
    /// Acceptance conditions are enforced for `k > k0`; `None` selects
    /// `max_macro_iters * 2^depth`, which disables them.
    pub k0: Option<i64>,
    pub tau: f64,
    pub max_macro_iters: usize,
    pub armijo_a: f64,
    pub armijo_gamma: f64,
    pub armijo_delta: f64,
    pub seed: u64,
    /// Restrict branch and leaf subproblems to the subtree of the selected node
    /// and the points routed through it while `k <= k0`.
    pub subtree_proxy: bool,
    /// Force the imbalance gate off so every branch update is a balanced one.
    pub no_reassign: bool,
    /// Clustering repetitions used by the initialization.
    pub init_repeats: usize,
    /// Iteration cap of the quasi-Newton solver in the balanced regime.
    pub balanced_max_iters: usize,
    /// Stop when a macro iteration changes the error by at most this fraction.
    pub termination_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            mu: 1.0,
            lambda_omega: None,
            lambda_beta: None,
            eps1_0: 0.1,
            eps2_0: 0.3,
            eps3_0: 0.4,
            zeta: 0.8,
            theta_omega: 0.9,
            theta_beta: 0.9,
            upsilon: 0.9,
            k0: None,
            tau: 1e-6,
            max_macro_iters: 10,
            armijo_a: 1.0,
            armijo_gamma: 1e-4,
            armijo_delta: 0.5,
            seed: 0,
            subtree_proxy: true,
            no_reassign: false,
            init_repeats: 10,
            balanced_max_iters: 30,
            termination_tol: 1e-7,
        }
    }
}

fn open01(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(SrtError::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn half_open01(name: &str, v: f64) -> Result<()> {
    if (0.0..1.0).contains(&v) {
        Ok(())
    } else {
        Err(SrtError::Config(format!("{name} must lie in [0, 1), got {v}")))
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.depth > MAX_DEPTH {
            return Err(SrtError::Config(format!(
                "depth must be in 1..={MAX_DEPTH}, got {}",
                self.depth
            )));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(SrtError::Config(format!("mu must be positive, got {}", self.mu)));
        }
        for (name, v) in [("lambda_omega", self.lambda_omega), ("lambda_beta", self.lambda_beta)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(SrtError::Config(format!("{name} must be non-negative, got {v}")));
                }
            }
        }
        open01("eps1_0", self.eps1_0)?;
        open01("eps2_0", self.eps2_0)?;
        open01("eps3_0", self.eps3_0)?;
        open01("zeta", self.zeta)?;
        open01("armijo_gamma", self.armijo_gamma)?;
        open01("armijo_delta", self.armijo_delta)?;
        half_open01("theta_omega", self.theta_omega)?;
        half_open01("theta_beta", self.theta_beta)?;
        half_open01("upsilon", self.upsilon)?;
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(SrtError::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.armijo_a.is_finite() && self.armijo_a > 0.0) {
            return Err(SrtError::Config(format!("armijo_a must be positive, got {}", self.armijo_a)));
        }
        if matches!(self.k0, Some(k) if k < -1) {
            return Err(SrtError::Config("k0 must be >= -1".into()));
        }
        if self.init_repeats == 0 {
            return Err(SrtError::Config("init_repeats must be at least 1".into()));
        }
        if !(self.termination_tol >= 0.0) {
            return Err(SrtError::Config("termination_tol must be non-negative".into()));
        }
        Ok(())
    }

    /// Legal but suspicious settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.eps1_0 <= self.eps2_0 {
            out.push(format!(
                "eps1_0 = {} <= eps2_0 = {}: the moderate-imbalance band is empty",
                self.eps1_0, self.eps2_0
            ));
        }
        out
    }

    /// Penalty weights for `p` features, resolving the automatic defaults.
    pub fn regularization(&self, n_features: usize) -> Regularization {
        let topo = TreeTopology::new(self.depth.clamp(1, MAX_DEPTH)).expect("clamped depth");
        let p = n_features.max(1) as f64;
        Regularization::new(
            self.lambda_omega.unwrap_or(2.0 / (p * topo.n_branch() as f64)),
            self.lambda_beta.unwrap_or(2.0 / (p * topo.n_leaf() as f64)),
        )
    }

    pub fn effective_k0(&self) -> i64 {
        self.k0
            .unwrap_or((self.max_macro_iters as i64).saturating_mul(1i64 << self.depth.min(40)))
    }

    /// Parse flat `key = value` lines; `#` starts a comment and unknown keys are
    /// rejected. Unlisted fields keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SrtError::Config(format!("line {}: expected key = value", line_no + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| SrtError::Config(format!("line {}: {e}", line_no + 1)))?;
        }
        Ok(cfg)
    }

    /// Assign one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for {key}"))
        }
        fn auto_or<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<Option<T>, String> {
            if v.eq_ignore_ascii_case("auto") { Ok(None) } else { num(key, v).map(Some) }
        }
        match key {
            "depth" => self.depth = num(key, value)?,
            "mu" => self.mu = num(key, value)?,
            "lambda_omega" => self.lambda_omega = auto_or(key, value)?,
            "lambda_beta" => self.lambda_beta = auto_or(key, value)?,
            "eps1_0" => self.eps1_0 = num(key, value)?,
            "eps2_0" => self.eps2_0 = num(key, value)?,
            "eps3_0" => self.eps3_0 = num(key, value)?,
            "zeta" => self.zeta = num(key, value)?,
            "theta_omega" => self.theta_omega = num(key, value)?,
            "theta_beta" => self.theta_beta = num(key, value)?,
            "upsilon" => self.upsilon = num(key, value)?,
            "k0" => self.k0 = auto_or(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "max_macro_iters" => self.max_macro_iters = num(key, value)?,
            "armijo_a" => self.armijo_a = num(key, value)?,
            "armijo_gamma" => self.armijo_gamma = num(key, value)?,
            "armijo_delta" => self.armijo_delta = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "subtree_proxy" => self.subtree_proxy = num(key, value)?,
            "no_reassign" => self.no_reassign = num(key, value)?,
            "init_repeats" => self.init_repeats = num(key, value)?,
            "balanced_max_iters" => self.balanced_max_iters = num(key, value)?,
            "termination_tol" => self.termination_tol = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every field as `key = value`, in a form [`parse`](Self::parse) reads back
    /// to an equal config.
    pub fn to_kv_string(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
        }
        let fields: [(&str, String); 23] = [
            ("depth", self.depth.to_string()),
            ("mu", self.mu.to_string()),
            ("lambda_omega", opt(&self.lambda_omega)),
            ("lambda_beta", opt(&self.lambda_beta)),
            ("eps1_0", self.eps1_0.to_string()),
            ("eps2_0", self.eps2_0.to_string()),
            ("eps3_0", self.eps3_0.to_string()),
            ("zeta", self.zeta.to_string()),
            ("theta_omega", self.theta_omega.to_string()),
            ("theta_beta", self.theta_beta.to_string()),
            ("upsilon", self.upsilon.to_string()),
            ("k0", opt(&self.k0)),
            ("tau", self.tau.to_string()),
            ("max_macro_iters", self.max_macro_iters.to_string()),
            ("armijo_a", self.armijo_a.to_string()),
            ("armijo_gamma", self.armijo_gamma.to_string()),
            ("armijo_delta", self.armijo_delta.to_string()),
            ("seed", self.seed.to_string()),
            ("subtree_proxy", self.subtree_proxy.to_string()),
            ("no_reassign", self.no_reassign.to_string()),
            ("init_repeats", self.init_repeats.to_string()),
            ("balanced_max_iters", self.balanced_max_iters.to_string()),
            ("termination_tol", self.termination_tol.to_string()),
        ];
        fields.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(TrainConfig::parse(&cfg.to_kv_string()).unwrap(), cfg);
    }

    #[test]
    fn non_default_round_trip() {
        let cfg = TrainConfig {
            depth: 3,
            lambda_omega: Some(0.0123),
            k0: Some(-1),
            tau: 1.0 / 3.0,
            seed: u64::MAX,
            subtree_proxy: false,
            ..TrainConfig::default()
        };
        assert_eq!(TrainConfig::parse(&cfg.to_kv_string()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = TrainConfig::parse("# header\n\ndepth = 3 # deeper\nmu=2\n").unwrap();
        assert_eq!((cfg.depth, cfg.mu), (3, 2.0));
    }

    #[test]
    fn rejects_unknown_key_and_bad_values() {
        assert!(TrainConfig::parse("depht = 2").is_err());
        assert!(TrainConfig::parse("depth = two").is_err());
        assert!(TrainConfig::parse("depth").is_err());
        let zero = TrainConfig { depth: 0, ..TrainConfig::default() };
        assert!(matches!(zero.validate(), Err(SrtError::Config(_))));
        let bad_zeta = TrainConfig { zeta: 1.0, ..TrainConfig::default() };
        assert!(bad_zeta.validate().is_err());
    }

    #[test]
    fn automatic_regularization() {
        let cfg = TrainConfig { depth: 2, ..TrainConfig::default() };
        let reg = cfg.regularization(4);
        assert!((reg.lambda_omega - 2.0 / 12.0).abs() < 1e-15);
        assert!((reg.lambda_beta - 2.0 / 16.0).abs() < 1e-15);
        assert_eq!(cfg.effective_k0(), 40);
    }
}
