use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{matvec_add, matvec_backward, xavier, Param, ParamMut};

/// Feature-wise linear modulation `y = γ(c) ⊙ h + β(c)`.
///
/// γ and β are each `W2 · relu(W1 c + b1) + b2` with a small hidden layer.
/// Identity initialization zeroes both `W2` and sets `b2` to 1 for γ and 0
/// for β, so the layer starts as exactly `y = h` for every `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmLayer {
    pub dim: usize,
    pub hidden: usize,
    pub gamma_w1: Vec<f64>,
    pub gamma_b1: Vec<f64>,
    pub gamma_w2: Vec<f64>,
    pub gamma_b2: Vec<f64>,
    pub beta_w1: Vec<f64>,
    pub beta_b1: Vec<f64>,
    pub beta_w2: Vec<f64>,
    pub beta_b2: Vec<f64>,
}

pub struct FilmCache {
    z_gamma: Vec<f64>,
    z_beta: Vec<f64>,
    gamma: Vec<f64>,
}

pub const N_CONTROLS: usize = 2;

fn branch(w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64], c: &[f64; 2]) -> (Vec<f64>, Vec<f64>) {
    let mut z = b1.to_vec();
    matvec_add(w1, c, &mut z);
    z.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut out = b2.to_vec();
    matvec_add(w2, &z, &mut out);
    (z, out)
}

#[allow(clippy::too_many_arguments)]
fn branch_backward(
    w2: &[f64],
    z: &[f64],
    c: &[f64; 2],
    d_out: &[f64],
    gw1: &mut [f64],
    gb1: &mut [f64],
    gw2: &mut [f64],
    gb2: &mut [f64],
) {
    for (g, d) in gb2.iter_mut().zip(d_out) {
        *g += d;
    }
    let mut dz = vec![0.0; z.len()];
    matvec_backward(w2, z, d_out, gw2, Some(&mut dz));
    for (dzi, &zi) in dz.iter_mut().zip(z) {
        if zi <= 0.0 {
            *dzi = 0.0;
        }
    }
    for (g, d) in gb1.iter_mut().zip(&dz) {
        *g += d;
    }
    matvec_backward(&[], c, &dz, gw1, None);
}

impl FilmLayer {
    pub fn identity<R: Rng>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut w1 = || xavier(rng, N_CONTROLS, hidden, hidden * N_CONTROLS);
        let (gamma_w1, beta_w1) = (w1(), w1());
        Self {
            dim,
            hidden,
            gamma_w1,
            gamma_b1: vec![0.1; hidden],
            gamma_w2: vec![0.0; dim * hidden],
            gamma_b2: vec![1.0; dim],
            beta_w1,
            beta_b1: vec![0.1; hidden],
            beta_w2: vec![0.0; dim * hidden],
            beta_b2: vec![0.0; dim],
        }
    }

    pub fn gamma_beta(&self, c: &[f64; 2]) -> (Vec<f64>, Vec<f64>) {
        let (_, g) = branch(&self.gamma_w1, &self.gamma_b1, &self.gamma_w2, &self.gamma_b2, c);
        let (_, b) = branch(&self.beta_w1, &self.beta_b1, &self.beta_w2, &self.beta_b2, c);
        (g, b)
    }

    pub fn forward(&self, h: &[f64], c: &[f64; 2]) -> (Vec<f64>, FilmCache) {
        let (z_gamma, gamma) = branch(&self.gamma_w1, &self.gamma_b1, &self.gamma_w2, &self.gamma_b2, c);
        let (z_beta, beta) = branch(&self.beta_w1, &self.beta_b1, &self.beta_w2, &self.beta_b2, c);
        let y = h.iter().zip(&gamma).zip(&beta).map(|((h, g), b)| g * h + b).collect();
        (y, FilmCache { z_gamma, z_beta, gamma })
    }

    /// Returns `dL/dh`.
    pub fn backward(&self, h: &[f64], c: &[f64; 2], cache: &FilmCache, d_y: &[f64], grads: &mut Self) -> Vec<f64> {
        let d_gamma: Vec<f64> = d_y.iter().zip(h).map(|(d, h)| d * h).collect();
        branch_backward(
            &self.gamma_w2,
            &cache.z_gamma,
            c,
            &d_gamma,
            &mut grads.gamma_w1,
            &mut grads.gamma_b1,
            &mut grads.gamma_w2,
            &mut grads.gamma_b2,
        );
        branch_backward(
            &self.beta_w2,
            &cache.z_beta,
            c,
            d_y,
            &mut grads.beta_w1,
            &mut grads.beta_b1,
            &mut grads.beta_w2,
            &mut grads.beta_b2,
        );
        d_y.iter().zip(&cache.gamma).map(|(d, g)| d * g).collect()
    }

    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<f64>| vec![0.0; v.len()];
        Self {
            dim: self.dim,
            hidden: self.hidden,
            gamma_w1: z(&self.gamma_w1),
            gamma_b1: z(&self.gamma_b1),
            gamma_w2: z(&self.gamma_w2),
            gamma_b2: z(&self.gamma_b2),
            beta_w1: z(&self.beta_w1),
            beta_b1: z(&self.beta_b1),
            beta_w2: z(&self.beta_w2),
            beta_b2: z(&self.beta_b2),
        }
    }

    pub fn params(&self) -> Vec<Param<'_>> {
        vec![
            Param { name: "film.gamma_w1", data: &self.gamma_w1, decay: true },
            Param { name: "film.gamma_b1", data: &self.gamma_b1, decay: false },
            Param { name: "film.gamma_w2", data: &self.gamma_w2, decay: true },
            Param { name: "film.gamma_b2", data: &self.gamma_b2, decay: false },
            Param { name: "film.beta_w1", data: &self.beta_w1, decay: true },
            Param { name: "film.beta_b1", data: &self.beta_b1, decay: false },
            Param { name: "film.beta_w2", data: &self.beta_w2, decay: true },
            Param { name: "film.beta_b2", data: &self.beta_b2, decay: false },
        ]
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        vec![
            ParamMut { name: "film.gamma_w1", data: &mut self.gamma_w1, decay: true },
            ParamMut { name: "film.gamma_b1", data: &mut self.gamma_b1, decay: false },
            ParamMut { name: "film.gamma_w2", data: &mut self.gamma_w2, decay: true },
            ParamMut { name: "film.gamma_b2", data: &mut self.gamma_b2, decay: false },
            ParamMut { name: "film.beta_w1", data: &mut self.beta_w1, decay: true },
            ParamMut { name: "film.beta_b1", data: &mut self.beta_b1, decay: false },
            ParamMut { name: "film.beta_w2", data: &mut self.beta_w2, decay: true },
            ParamMut { name: "film.beta_b2", data: &mut self.beta_b2, decay: false },
        ]
    }
}
