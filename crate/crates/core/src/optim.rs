//! Derivative-free Nelder–Mead simplex minimizer.

/// Result of a single simplex run.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead with the standard reflection (1), expansion (2),
/// contraction (1/2) and shrink (1/2) coefficients.
#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_iterations: usize,
    /// Stop once the spread of objective values across the simplex is at most this
    pub f_tolerance: f64,
    /// and every vertex lies within this many initial step lengths of the best one.
    pub x_tolerance: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            f_tolerance: 1e-8,
            x_tolerance: 1e-6,
        }
    }
}

impl NelderMead {
    /// Minimizes `f` starting from the simplex `start + steps[i] e_i`.
    pub fn minimize<F>(&self, mut f: F, start: &[f64], steps: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = start.len();
        assert_eq!(n, steps.len(), "one step per coordinate");
        let mut evaluations = 0usize;
        let mut eval = |x: &[f64], evaluations: &mut usize| {
            *evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(start.to_vec());
        for i in 0..n {
            let mut v = start.to_vec();
            v[i] += steps[i];
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();

        if n == 0 {
            return Minimum {
                x: vec![],
                f: values[0],
                iterations: 0,
                evaluations,
                converged: true,
            };
        }

        let mut order: Vec<usize> = (0..=n).collect();
        let mut centroid = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial2 = vec![0.0; n];
        let mut iterations = 0;
        let mut converged = false;

        while iterations < self.max_iterations {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let best = order[0];
            let worst = order[n];
            let second_worst = order[n - 1];

            let small = simplex.iter().all(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .zip(steps)
                    .all(|((x, b), s)| (x - b).abs() <= self.x_tolerance * s.abs())
            });
            if (values[worst] - values[best]).abs() <= self.f_tolerance && small {
                converged = true;
                break;
            }
            iterations += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for &i in &order[..n] {
                for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                    *c += x / n as f64;
                }
            }

            // reflection
            for j in 0..n {
                trial[j] = centroid[j] + (centroid[j] - simplex[worst][j]);
            }
            let f_reflect = eval(&trial, &mut evaluations);

            if f_reflect < values[best] {
                for j in 0..n {
                    trial2[j] = centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]);
                }
                let f_expand = eval(&trial2, &mut evaluations);
                if f_expand < f_reflect {
                    simplex[worst].copy_from_slice(&trial2);
                    values[worst] = f_expand;
                } else {
                    simplex[worst].copy_from_slice(&trial);
                    values[worst] = f_reflect;
                }
                continue;
            }
            if f_reflect < values[second_worst] {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
                continue;
            }

            // contraction, outside if the reflection improved on the worst point
            let outside = f_reflect < values[worst];
            for j in 0..n {
                trial2[j] = if outside {
                    centroid[j] + 0.5 * (trial[j] - centroid[j])
                } else {
                    centroid[j] + 0.5 * (simplex[worst][j] - centroid[j])
                };
            }
            let f_contract = eval(&trial2, &mut evaluations);
            let threshold = if outside { f_reflect } else { values[worst] };
            if f_contract < threshold {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_contract;
                continue;
            }

            // shrink toward the best vertex
            let anchor = simplex[best].clone();
            for &i in &order[1..] {
                for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                    *x = a + 0.5 * (*x - a);
                }
                values[i] = eval(&simplex[i], &mut evaluations);
            }
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("simplex is nonempty");
        Minimum {
            x: simplex[best].clone(),
            f: values[best],
            iterations,
            evaluations,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_bowl() {
        let nm = NelderMead::default();
        let r = nm.minimize(
            |x| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + 0.5,
            &[0.0, 0.0],
            &[1.0, 1.0],
        );
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 3.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.x[1], -1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.f, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn rosenbrock() {
        let nm = NelderMead {
            max_iterations: 10_000,
            f_tolerance: 1e-14,
            x_tolerance: 1e-8,
        };
        let r = nm.minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.1, 0.1],
        );
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn nan_is_treated_as_infeasible() {
        let nm = NelderMead::default();
        let r = nm.minimize(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) },
            &[0.5],
            &[0.2],
        );
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let nm = NelderMead {
            max_iterations: 3,
            f_tolerance: 0.0,
            x_tolerance: 0.0,
        };
        let r = nm.minimize(|x| x[0] * x[0] + x[1] * x[1], &[5.0, 5.0], &[1.0, 1.0]);
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
