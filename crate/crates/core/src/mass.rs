//! Discrete mass distribution over sample points and the
//! distribution-similarity metric `F = F_max + F_uni`.

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Points};

/// Gaussian kernel `exp(-beta * r^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    beta: f64,
}

impl Kernel {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta.is_finite() {
            Ok(Kernel { beta })
        } else {
            Err(Error::invalid(format!("kernel bandwidth must be positive, got {beta}")))
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn weight_sq(&self, r2: f64) -> f64 {
        (-self.beta * r2).exp()
    }

    #[inline]
    pub fn weight(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight_sq(dist_sq(a, b))
    }
}

/// Masses `P_k`, one per sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector(pub Vec<f64>);

impl MassVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Errors on the first entry that is not strictly positive.
    pub fn check_positive(&self) -> Result<()> {
        check_positive(&self.0)
    }
}

impl From<Vec<f64>> for MassVector {
    fn from(v: Vec<f64>) -> Self {
        MassVector(v)
    }
}

pub(crate) fn check_positive(values: &[f64]) -> Result<()> {
    match values.iter().position(|&p| !(p > 0.0)) {
        Some(index) => Err(Error::NonPositiveMass {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// `(1/n) * sum_i exp(-beta |q - p_i|^2)`, summed in robot order.
pub fn mass_at(positions: &Points, q: &[f64], kernel: &Kernel) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::NoRobots);
    }
    if q.len() != positions.dim() {
        return Err(Error::DimensionMismatch {
            expected: positions.dim(),
            found: q.len(),
        });
    }
    let sum: f64 = positions.iter().map(|p| kernel.weight(q, p)).sum();
    Ok(sum / positions.len() as f64)
}

pub fn mass_vector(positions: &Points, samples: &Points, kernel: &Kernel) -> Result<MassVector> {
    samples
        .iter()
        .map(|q| mass_at(positions, q, kernel))
        .collect::<Result<Vec<_>>>()
        .map(MassVector)
}

/// `ln sqrt(sum_k P_k^2)` computed with max-scaling so tiny masses do not underflow.
fn ln_norm(p: &[f64]) -> f64 {
    let max = p.iter().cloned().fold(0.0, f64::max);
    let s: f64 = p.iter().map(|x| (x / max).powi(2)).sum();
    max.ln() + 0.5 * s.ln()
}

/// `F_max = -ln sqrt(sum_k P_k^2)`.
pub fn f_max(p: &MassVector) -> Result<f64> {
    check_non_empty(p)?;
    p.check_positive()?;
    Ok(-ln_norm(&p.0))
}

/// `F_uni = -(1/m) sum_k ln sqrt(m P_k^2 / sum_l P_l^2)`.
pub fn f_uni(p: &MassVector) -> Result<f64> {
    check_non_empty(p)?;
    p.check_positive()?;
    let m = p.len() as f64;
    let ln_n = ln_norm(&p.0);
    let half_ln_m = 0.5 * m.ln();
    let s: f64 = p.0.iter().map(|&x| half_ln_m + x.ln() - ln_n).sum();
    Ok(-s / m)
}

/// `F = F_max + F_uni`.
pub fn f_total(p: &MassVector) -> Result<f64> {
    Ok(f_max(p)? + f_uni(p)?)
}

/// All three metric values at once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub f: f64,
    pub f_max: f64,
    pub f_uni: f64,
}

pub fn similarity(p: &MassVector) -> Result<Similarity> {
    let f_max = f_max(p)?;
    let f_uni = f_uni(p)?;
    Ok(Similarity {
        f: f_max + f_uni,
        f_max,
        f_uni,
    })
}

fn check_non_empty(p: &MassVector) -> Result<()> {
    if p.is_empty() {
        Err(Error::NoSamplePoints)
    } else {
        Ok(())
    }
}

/// Gradient of `F` with respect to robot `i`:
/// `(2 beta / (m n)) sum_k P_k^{-1} exp(-beta |p_i - q_k|^2) (p_i - q_k)`.
pub fn grad_f_robot(
    positions: &Points,
    i: usize,
    samples: &Points,
    masses: &MassVector,
    kernel: &Kernel,
) -> Result<Vec<f64>> {
    if positions.is_empty() {
        return Err(Error::NoRobots);
    }
    if masses.len() != samples.len() {
        return Err(Error::invalid(format!(
            "{} masses for {} sample points",
            masses.len(),
            samples.len()
        )));
    }
    masses.check_positive()?;
    let p = positions.get(i);
    let mut g = vec![0.0; positions.dim()];
    for (q, &pk) in samples.iter().zip(masses.values()) {
        let w = kernel.weight(p, q) / pk;
        for ((g, a), b) in g.iter_mut().zip(p).zip(q) {
            *g += w * (a - b);
        }
    }
    let scale = 2.0 * kernel.beta() / (samples.len() * positions.len()) as f64;
    g.iter_mut().for_each(|x| *x *= scale);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pts(rows: &[[f64; 2]]) -> Points {
        Points::from_rows(2, rows).unwrap()
    }

    #[test]
    fn single_robot_on_the_point() {
        let k = Kernel::new(1.5).unwrap();
        assert_eq!(mass_at(&pts(&[[1.0, 2.0]]), &[1.0, 2.0], &k).unwrap(), 1.0);
    }

    #[test]
    fn two_robot_mass() {
        let k = Kernel::new(1.5).unwrap();
        let m = mass_at(&pts(&[[0.0, 0.0], [0.6, 0.8]]), &[0.0, 0.0], &k).unwrap();
        // (1 + e^{-1.5}) / 2
        assert_relative_eq!(m, 0.611_565_080_074_215_1, max_relative = 1e-15);
        assert!((m - 0.6115651).abs() < 1e-7);
    }

    #[test]
    fn far_robots_vanish() {
        let k = Kernel::new(1.5).unwrap();
        assert_eq!(mass_at(&pts(&[[1e3, 0.0]]), &[0.0, 0.0], &k).unwrap(), 0.0);
        assert!(matches!(mass_at(&Points::with_capacity(2, 0), &[0.0, 0.0], &k), Err(Error::NoRobots)));
    }

    #[test]
    fn mass_vector_is_symmetric_in_robots() {
        let k = Kernel::new(0.7).unwrap();
        let samples = pts(&[[0.0, 0.0], [1.0, 0.5], [-2.0, 1.0]]);
        let a = pts(&[[0.1, 0.2], [1.5, -0.3], [0.0, 2.0]]);
        let b = pts(&[[0.0, 2.0], [0.1, 0.2], [1.5, -0.3]]);
        let doubled = pts(&[[0.1, 0.2], [1.5, -0.3], [0.0, 2.0], [0.1, 0.2], [1.5, -0.3], [0.0, 2.0]]);
        let pa = mass_vector(&a, &samples, &k).unwrap();
        let pb = mass_vector(&b, &samples, &k).unwrap();
        let pd = mass_vector(&doubled, &samples, &k).unwrap();
        for ((x, y), z) in pa.values().iter().zip(pb.values()).zip(pd.values()) {
            assert_relative_eq!(x, y, max_relative = 1e-15);
            assert_relative_eq!(x, z, max_relative = 1e-15);
        }
        let single = mass_vector(&a, &pts(&[[1.0, 0.5]]), &k).unwrap();
        assert_eq!(single.values()[0], pa.values()[1]);
    }

    #[test]
    fn metric_values() {
        assert_eq!(f_max(&MassVector(vec![1.0])).unwrap(), 0.0);
        assert_relative_eq!(f_max(&MassVector(vec![0.5, 0.5])).unwrap(), 0.346_573_590_279_972_6, max_relative = 1e-14);
        // -(1/4) ln 0.64
        assert_relative_eq!(f_uni(&MassVector(vec![1.0, 0.5])).unwrap(), 0.111_571_775_657_104_86, max_relative = 1e-13);
        assert_eq!(f_total(&MassVector(vec![1.0])).unwrap(), 0.0);
        // f_max = -ln sqrt(1.25) cancels f_uni exactly for (1, 0.5)
        assert!(f_total(&MassVector(vec![1.0, 0.5])).unwrap().abs() < 1e-15);
    }

    #[test]
    fn scaling_behaviour() {
        let p = MassVector(vec![0.3, 0.01, 0.7, 0.2]);
        let c = 0.125;
        let cp = MassVector(p.values().iter().map(|x| x * c).collect());
        assert_relative_eq!(f_max(&cp).unwrap() - f_max(&p).unwrap(), -c.ln(), max_relative = 1e-13);
        assert_relative_eq!(f_uni(&cp).unwrap(), f_uni(&p).unwrap(), max_relative = 1e-13);
    }

    #[test]
    fn equal_masses_are_uniform() {
        for m in 1..20 {
            let p = MassVector(vec![0.037; m]);
            assert!(f_uni(&p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_masses_do_not_underflow() {
        let p = MassVector(vec![1e-200, 1e-210, 1e-205]);
        let f = f_total(&p).unwrap();
        let closed = -(p.values().iter().map(|x| x.ln()).sum::<f64>()) / 3.0 - 0.5 * 3f64.ln();
        assert_relative_eq!(f, closed, max_relative = 1e-12);
    }

    #[test]
    fn non_positive_mass_is_reported() {
        let err = f_total(&MassVector(vec![0.5, 0.0, 0.1])).unwrap_err();
        assert!(matches!(err, Error::NonPositiveMass { index: 1, .. }));
        assert!(f_max(&MassVector(vec![])).is_err());
    }

    #[test]
    fn gradient_vanishes_on_the_point() {
        let k = Kernel::new(1.5).unwrap();
        let p = pts(&[[2.0, 3.0]]);
        let q = pts(&[[2.0, 3.0]]);
        let masses = mass_vector(&p, &q, &k).unwrap();
        assert_eq!(grad_f_robot(&p, 0, &q, &masses, &k).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_symmetry() {
        let k = Kernel::new(1.5).unwrap();
        let q = pts(&[[-1.0, 0.0], [1.0, 0.0]]);
        let p = pts(&[[0.0, 0.7]]);
        let masses = MassVector(vec![0.2, 0.2]);
        let g = grad_f_robot(&p, 0, &q, &masses, &k).unwrap();
        assert!(g[0].abs() < 1e-17);
        assert!(g[1] > 0.0);
    }
}
