use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::rng::{self, open01};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistFamily {
    Uniform01,
    Uniform11,
    Gaussian,
    Laplace,
    Gumbel,
    VonMises,
}

/// Location and scale of a distribution. For von Mises `scale` is the
/// concentration kappa. Ignored by the uniform families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistParams {
    pub loc: f64,
    pub scale: f64,
}

impl DistFamily {
    pub const ALL: [DistFamily; 6] = [
        DistFamily::Uniform01,
        DistFamily::Uniform11,
        DistFamily::Gaussian,
        DistFamily::Laplace,
        DistFamily::Gumbel,
        DistFamily::VonMises,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistFamily::Uniform01 => "uniform01",
            DistFamily::Uniform11 => "uniform11",
            DistFamily::Gaussian => "gaussian",
            DistFamily::Laplace => "laplace",
            DistFamily::Gumbel => "gumbel",
            DistFamily::VonMises => "vonmises",
        }
    }

    pub fn default_params(self) -> DistParams {
        let scale = match self {
            DistFamily::Uniform01 | DistFamily::Uniform11 => 1.0,
            DistFamily::Gaussian => 0.2,
            DistFamily::Laplace => 0.07,
            DistFamily::Gumbel => 0.1,
            DistFamily::VonMises => 0.1,
        };
        DistParams { loc: 0.0, scale }
    }
}

/// `length` i.i.d. draws. Laplace and Gumbel use inverse CDFs, von Mises the
/// Best–Fisher rejection sampler with angles divided by pi.
pub fn sample_dist(family: DistFamily, params: Option<DistParams>, length: usize, seed: u64) -> Result<Vec<f64>> {
    let p = params.unwrap_or_else(|| family.default_params());
    if !p.loc.is_finite() || !p.scale.is_finite() {
        return Err(config_err!("{} parameters must be finite", family.name()));
    }
    let scale_ok = match family {
        DistFamily::Uniform01 | DistFamily::Uniform11 => true,
        DistFamily::VonMises => p.scale >= 0.0,
        _ => p.scale > 0.0,
    };
    if !scale_ok {
        return Err(config_err!("invalid scale {} for {}", p.scale, family.name()));
    }
    let mut r = rng::rng(seed);
    let r = &mut r;
    let out = match family {
        DistFamily::Uniform01 => (0..length).map(|_| open01(r)).collect(),
        DistFamily::Uniform11 => (0..length).map(|_| 2.0 * open01(r) - 1.0).collect(),
        DistFamily::Gaussian => (0..length)
            .map(|_| {
                let z: f64 = StandardNormal.sample(r);
                p.loc + p.scale * z
            })
            .collect(),
        DistFamily::Laplace => (0..length)
            .map(|_| {
                let u = open01(r) - 0.5;
                p.loc - p.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect(),
        DistFamily::Gumbel => (0..length)
            .map(|_| p.loc - p.scale * (-open01(r).ln()).ln())
            .collect(),
        DistFamily::VonMises => (0..length).map(|_| von_mises(r, p.loc, p.scale) / PI).collect(),
    };
    Ok(out)
}

/// Best & Fisher (1979) rejection sampler; returns an angle in [-pi, pi].
fn von_mises(r: &mut rng::Rng, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return wrap_angle(mu + PI * (2.0 * open01(r) - 1.0));
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let s = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1 = open01(r);
        let u2 = open01(r);
        let u3 = open01(r);
        let z = (PI * u1).cos();
        let f = (1.0 + s * z) / (s + z);
        let c = kappa * (s - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = (u3 - 0.5).signum() * f.clamp(-1.0, 1.0).acos();
            return wrap_angle(mu + theta);
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    w.clamp(-PI, PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn uniform_ranges() {
        let x = sample_dist(DistFamily::Uniform01, None, 10_000, 1).unwrap();
        assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let x = sample_dist(DistFamily::Uniform11, None, 10_000, 1).unwrap();
        assert!(x.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn gaussian_moments() {
        let (m, v) = moments(&sample_dist(DistFamily::Gaussian, None, 100_000, 4).unwrap());
        assert!(m.abs() < 0.005);
        assert!((v.sqrt() - 0.2).abs() < 0.005);
    }

    #[test]
    fn von_mises_scaled_into_unit_interval() {
        let x = sample_dist(DistFamily::VonMises, None, 20_000, 2).unwrap();
        assert!(x.iter().all(|&v| (-1.0..=1.0).contains(&v)));
        // kappa = 0.1 is nearly uniform on the circle: variance of theta/pi
        // close to 1/3.
        let (m, v) = moments(&x);
        assert!(m.abs() < 0.02);
        assert!((v - 1.0 / 3.0).abs() < 0.03);
        // Strong concentration collapses around the mean direction.
        let tight = sample_dist(DistFamily::VonMises, Some(DistParams { loc: 0.5, scale: 200.0 }), 5000, 3).unwrap();
        let (m, v) = moments(&tight);
        assert!((m - 0.5 / PI).abs() < 0.01);
        assert!(v < 1e-3);
    }

    #[test]
    fn invalid_params_are_config_errors() {
        for fam in [DistFamily::Gaussian, DistFamily::Laplace, DistFamily::Gumbel] {
            let bad = Some(DistParams { loc: 0.0, scale: 0.0 });
            assert!(sample_dist(fam, bad, 4, 0).is_err());
        }
        let bad = Some(DistParams { loc: 0.0, scale: -1.0 });
        assert!(sample_dist(DistFamily::VonMises, bad, 4, 0).is_err());
    }
}
