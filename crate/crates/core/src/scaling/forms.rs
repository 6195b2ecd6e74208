use std::fmt;
use std::sync::Arc;

/// A parametric family for `g_T(k)` that is linear in its regression
/// coefficients after a fixed transform of the response.
pub trait ScalingForm: Send + Sync {
    /// Registry key.
    fn name(&self) -> &str;

    /// Number of regression coefficients, intercept included.
    fn n_coefficients(&self) -> usize;

    /// Whether the regression works on `ln g` (true) or on `g` itself.
    fn log_response(&self) -> bool;

    /// Design row for window size `k`.
    fn regressors(&self, k: f64) -> Vec<f64>;

    /// Reported coefficients from raw regression coefficients.
    fn coefficients(&self, beta: &[f64]) -> Vec<f64>;

    /// `g_T(k)` from reported coefficients.
    fn evaluate(&self, coefficients: &[f64], k: f64) -> f64;

    /// Names of the reported coefficients.
    fn coefficient_names(&self) -> Vec<String>;
}

impl fmt::Debug for dyn ScalingForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `g(k) = a b^(k-1)`, fitted as `ln g = ln a + (k-1) ln b`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exponential;

impl ScalingForm for Exponential {
    fn name(&self) -> &str {
        "exponential"
    }
    fn n_coefficients(&self) -> usize {
        2
    }
    fn log_response(&self) -> bool {
        true
    }
    fn regressors(&self, k: f64) -> Vec<f64> {
        vec![1.0, k - 1.0]
    }
    fn coefficients(&self, beta: &[f64]) -> Vec<f64> {
        vec![beta[0].exp(), beta[1].exp()]
    }
    fn evaluate(&self, c: &[f64], k: f64) -> f64 {
        c[0] * c[1].powf(k - 1.0)
    }
    fn coefficient_names(&self) -> Vec<String> {
        vec!["a".into(), "b".into()]
    }
}

/// `g(k) = a k^beta`, fitted as `ln g = ln a + beta ln k`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Power;

impl ScalingForm for Power {
    fn name(&self) -> &str {
        "power"
    }
    fn n_coefficients(&self) -> usize {
        2
    }
    fn log_response(&self) -> bool {
        true
    }
    fn regressors(&self, k: f64) -> Vec<f64> {
        vec![1.0, k.ln()]
    }
    fn coefficients(&self, beta: &[f64]) -> Vec<f64> {
        vec![beta[0].exp(), beta[1]]
    }
    fn evaluate(&self, c: &[f64], k: f64) -> f64 {
        c[0] * k.powf(c[1])
    }
    fn coefficient_names(&self) -> Vec<String> {
        vec!["a".into(), "beta".into()]
    }
}

/// `g(k) = a_0 + a_1 k + ... + a_m k^m`, fitted on `g` directly.
#[derive(Debug, Clone, Copy)]
pub struct Polynomial {
    degree: usize,
    name: &'static str,
}

impl Polynomial {
    pub fn new(degree: usize) -> Self {
        const NAMES: [&str; 5] = ["poly0", "poly1", "poly2", "poly3", "poly4"];
        assert!(degree < NAMES.len(), "polynomial degree at most 4");
        Self {
            degree,
            name: NAMES[degree],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl ScalingForm for Polynomial {
    fn name(&self) -> &str {
        self.name
    }
    fn n_coefficients(&self) -> usize {
        self.degree + 1
    }
    fn log_response(&self) -> bool {
        false
    }
    fn regressors(&self, k: f64) -> Vec<f64> {
        (0..=self.degree).map(|p| k.powi(p as i32)).collect()
    }
    fn coefficients(&self, beta: &[f64]) -> Vec<f64> {
        beta.to_vec()
    }
    fn evaluate(&self, c: &[f64], k: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, a| acc * k + a)
    }
    fn coefficient_names(&self) -> Vec<String> {
        (0..=self.degree).map(|p| format!("a{p}")).collect()
    }
}

/// Scaling forms keyed by name.
#[derive(Clone)]
pub struct FormRegistry {
    forms: Vec<Arc<dyn ScalingForm>>,
}

impl fmt::Debug for FormRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl Default for FormRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl FormRegistry {
    pub fn empty() -> Self {
        Self { forms: Vec::new() }
    }

    /// Exponential, power and polynomials of degree 0 to 2.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Exponential));
        r.register(Arc::new(Power));
        for d in 0..=2 {
            r.register(Arc::new(Polynomial::new(d)));
        }
        r
    }

    /// Adds a form, replacing any existing form of the same name.
    pub fn register(&mut self, form: Arc<dyn ScalingForm>) {
        self.forms.retain(|f| f.name() != form.name());
        self.forms.push(form);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn ScalingForm>> {
        self.forms.iter().find(|f| f.name() == name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.forms.iter().map(|f| f.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn ScalingForm>> {
        self.forms.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        let r = FormRegistry::builtin();
        assert_eq!(r.names(), ["exponential", "power", "poly0", "poly1", "poly2"]);
        assert_eq!(r.get("poly1").unwrap().n_coefficients(), 2);
        assert!(r.get("cubic").is_none());
    }

    #[test]
    fn register_replaces_by_name() {
        let mut r = FormRegistry::builtin();
        r.register(Arc::new(Polynomial::new(1)));
        assert_eq!(r.names().len(), 5);
        assert_eq!(r.names().last(), Some(&"poly1"));
    }

    #[test]
    fn horner_evaluation() {
        let p = Polynomial::new(2);
        assert_eq!(p.evaluate(&[1.0, -2.0, 0.5], 4.0), 1.0 - 8.0 + 8.0);
    }
}
