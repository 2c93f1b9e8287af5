//! Straight-line reimplementation of the toy pipeline from its published
//! parameters, written against the documented model rather than the
//! library code: per-pixel pattern sums with integer-division upsampling,
//! half-pixel bilinear resizing, dense projections.
//!
//! Because the pipeline is linear up to the final normalization, every
//! embedding is `normalize(A s)` for a dense matrix `A` whose columns are
//! the embeddings of unit style vectors. Searches then run in that small
//! space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stylesteer::backends::toy::ToyParams;

#[derive(Debug, Clone)]
pub struct Channel {
    pub block: usize,
    pub resolution: u32,
    pub kind: String,
    pub layer: usize,
    pub index_in_layer: usize,
}

pub struct ToyOracle {
    pub params: ToyParams,
    pub channels: Vec<Channel>,
    pub resolutions: Vec<u32>,
}

fn kind_name(kind: &str) -> String {
    match kind {
        "conv" => "conv2".into(),
        "torgb" | "trgb" => "trgb".into(),
        other => other.into(),
    }
}

impl ToyOracle {
    pub fn new(params: &ToyParams) -> Self {
        let json = serde_json::to_value(&params.layout).unwrap();
        let mut channels = Vec::new();
        let mut resolutions = Vec::new();
        let mut layer = 0;
        for (b, block) in json["blocks"].as_array().unwrap().iter().enumerate() {
            let res = block["resolution"].as_u64().unwrap() as u32;
            resolutions.push(res);
            for l in block["layers"].as_array().unwrap() {
                let kind = kind_name(l["kind"].as_str().unwrap());
                for c in 0..l["channels"].as_u64().unwrap() as usize {
                    channels.push(Channel {
                        block: b,
                        resolution: res,
                        kind: kind.clone(),
                        layer,
                        index_in_layer: c,
                    });
                }
                layer += 1;
            }
        }
        ToyOracle {
            params: params.clone(),
            channels,
            resolutions,
        }
    }

    pub fn n(&self) -> usize {
        self.channels.len()
    }

    /// Row-major HWC image at `res`.
    pub fn image(&self, s: &[f64], res: u32) -> Vec<f64> {
        let r = res as usize;
        let mut img = vec![0.0; r * r * 3];
        for (ci, ch) in self.channels.iter().enumerate() {
            if ch.resolution > res || s[ci] == 0.0 {
                continue;
            }
            let p = &self.params.patterns[ch.layer][ch.index_in_layer];
            let rb = ch.resolution as f64;
            let factor = (res / ch.resolution) as usize;
            for y in 0..r {
                let yb = (y / factor) as f64;
                let wy = (std::f64::consts::PI * p.freq_y * (yb + 0.5) / rb + p.phase_y).cos();
                for x in 0..r {
                    let xb = (x / factor) as f64;
                    let wx = (std::f64::consts::PI * p.freq_x * (xb + 0.5) / rb + p.phase_x).cos();
                    for k in 0..3 {
                        img[(y * r + x) * 3 + k] += s[ci] * p.color[k] * wx * wy;
                    }
                }
            }
        }
        img
    }

    /// Half-pixel-centre bilinear resampling with edge clamping.
    pub fn resize(img: &[f64], src: usize, dst: usize) -> Vec<f64> {
        if src == dst {
            return img.to_vec();
        }
        let taps = |i: usize| {
            let c = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = c.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            let t = c - i0 as f64;
            (i0, i1, t)
        };
        let mut out = vec![0.0; dst * dst * 3];
        for y in 0..dst {
            let (y0, y1, ty) = taps(y);
            for x in 0..dst {
                let (x0, x1, tx) = taps(x);
                for k in 0..3 {
                    let at = |yy: usize, xx: usize| img[(yy * src + xx) * 3 + k];
                    out[(y * dst + x) * 3 + k] = (1.0 - ty) * ((1.0 - tx) * at(y0, x0) + tx * at(y0, x1))
                        + ty * ((1.0 - tx) * at(y1, x0) + tx * at(y1, x1));
                }
            }
        }
        out
    }

    fn project(matrix: &[f64], dim: usize, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..dim)
            .map(|r| matrix[r * n..(r + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Unnormalized joint and identity embeddings of the image at `res`.
    pub fn raw_embeddings(&self, s: &[f64], res: u32) -> (Vec<f64>, Vec<f64>) {
        let img = self.image(s, res);
        let j = &self.params.joint;
        let x = Self::resize(&img, res as usize, j.input_size as usize);
        let joint = Self::project(&j.matrix, j.dim, &x);
        let i = &self.params.identity;
        let x = Self::resize(&img, res as usize, i.input_size as usize);
        let ident = Self::project(&i.matrix, i.dim, &x);
        (joint, ident)
    }

    pub fn text(&self, prompt: &str) -> Vec<f64> {
        self.params
            .vocabulary
            .iter()
            .find(|v| v.prompt == prompt)
            .unwrap_or_else(|| panic!("{prompt} not in toy vocabulary"))
            .embedding
            .clone()
    }

    /// Style vectors of the seeded batch: latent `i` is drawn from a ChaCha8
    /// stream `i` seeded with `seed`, and every layer applies its affine map
    /// to the same latent.
    pub fn batch(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let d = self.params.latent_dim;
        (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                self.channels
                    .iter()
                    .map(|ch| {
                        let map = &self.params.affine[ch.layer];
                        let row = &map.weight[ch.index_in_layer * d..(ch.index_in_layer + 1) * d];
                        map.bias[ch.index_in_layer] + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    /// Channels a search may move: not tRGB, outside the top
    /// `exclude_top` blocks, and at most `opt_res`.
    pub fn mask(&self, opt_res: u32, exclude_trgb: bool, exclude_top: usize) -> Vec<bool> {
        let n_blocks = self.resolutions.len();
        self.channels
            .iter()
            .map(|ch| {
                ch.block + exclude_top < n_blocks
                    && ch.resolution <= opt_res
                    && !(exclude_trgb && ch.kind == "trgb")
            })
            .collect()
    }

    /// Dense embedding maps at `res`: `(A_joint, A_id)`, each row-major
    /// `dim x n_channels`.
    pub fn linear_maps(&self, res: u32) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.n();
        let mut aj = vec![vec![0.0; n]; self.params.joint.dim];
        let mut ai = vec![vec![0.0; n]; self.params.identity.dim];
        for c in 0..n {
            if self.channels[c].resolution > res {
                continue;
            }
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            let (j, i) = self.raw_embeddings(&e, res);
            for (r, v) in j.iter().enumerate() {
                aj[r][c] = *v;
            }
            for (r, v) in i.iter().enumerate() {
                ai[r][c] = *v;
            }
        }
        (aj, ai)
    }
}

fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The composite or single-channel objective reduced to the search
/// coordinates.
pub struct ReducedProblem {
    /// Search coordinate -> flat channel index.
    pub coords: Vec<usize>,
    /// Per image unnormalized joint / identity embeddings at delta = 0.
    pub base_joint: Vec<Vec<f64>>,
    pub base_ident: Vec<Vec<f64>>,
    /// Columns restricted to `coords`: `dim x coords`.
    pub bj: Vec<Vec<f64>>,
    pub bi: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub lambda_c: f64,
    pub lambda_id: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Terms {
    pub total: f64,
    pub clip: f64,
    pub identity: f64,
}

impl ReducedProblem {
    pub fn new(
        oracle: &ToyOracle,
        batch: &[Vec<f64>],
        mask: &[bool],
        res: u32,
        target: Vec<f64>,
        lambda_c: f64,
        lambda_id: f64,
    ) -> Self {
        let (aj, ai) = oracle.linear_maps(res);
        let coords: Vec<usize> = (0..oracle.n()).filter(|&c| mask[c]).collect();
        let restrict = |a: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            a.iter().map(|row| coords.iter().map(|&c| row[c]).collect()).collect()
        };
        ReducedProblem {
            base_joint: batch.iter().map(|s| matvec(&aj, s)).collect(),
            base_ident: batch.iter().map(|s| matvec(&ai, s)).collect(),
            bj: restrict(&aj),
            bi: restrict(&ai),
            coords,
            target,
            lambda_c,
            lambda_id,
        }
    }

    pub fn expand(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut full = vec![0.0; n];
        for (k, &c) in self.coords.iter().enumerate() {
            full[c] = x[k];
        }
        full
    }

    /// Loss terms and gradient with respect to the search coordinates.
    pub fn eval(&self, x: &[f64]) -> (Terms, Vec<f64>) {
        let uj = matvec(&self.bj, x);
        let ui = matvec(&self.bi, x);
        let m = self.base_joint.len() as f64;
        let mut clip = 0.0;
        let mut ident = 0.0;
        let mut gj = vec![0.0; uj.len()];
        let mut gi = vec![0.0; ui.len()];
        for (a, c) in self.base_joint.iter().zip(&self.base_ident) {
            let v: Vec<f64> = a.iter().zip(&uj).map(|(p, q)| p + q).collect();
            let nv = norm(&v);
            let e: Vec<f64> = v.iter().map(|q| q / nv).collect();
            let et = dot(&e, &self.target);
            clip += 1.0 - et;
            for k in 0..gj.len() {
                gj[k] -= self.lambda_c * (self.target[k] - e[k] * et) / nv / m;
            }
            let r0n = norm(c);
            let r0: Vec<f64> = c.iter().map(|q| q / r0n).collect();
            let w: Vec<f64> = c.iter().zip(&ui).map(|(p, q)| p + q).collect();
            let nw = norm(&w);
            let r: Vec<f64> = w.iter().map(|q| q / nw).collect();
            let rr = dot(&r, &r0);
            ident += 1.0 - rr;
            for k in 0..gi.len() {
                gi[k] -= self.lambda_id * (r0[k] - r[k] * rr) / nw / m;
            }
        }
        clip /= m;
        ident /= m;
        let mut grad = vec![0.0; x.len()];
        for (row, g) in self.bj.iter().zip(&gj) {
            for (acc, b) in grad.iter_mut().zip(row) {
                *acc += g * b;
            }
        }
        for (row, g) in self.bi.iter().zip(&gi) {
            for (acc, b) in grad.iter_mut().zip(row) {
                *acc += g * b;
            }
        }
        (
            Terms {
                total: self.lambda_c * clip + self.lambda_id * ident,
                clip,
                identity: ident,
            },
            grad,
        )
    }

    /// Gradient descent with Armijo backtracking from zero until the
    /// gradient norm falls below `tol` or `max_iters` steps were taken.
    pub fn descend(&self, tol: f64, max_iters: usize) -> (Vec<f64>, Terms, f64, usize) {
        let mut x = vec![0.0; self.coords.len()];
        let (mut t, mut g) = self.eval(&x);
        let mut lr = 1e-2;
        let mut it = 0;
        while it < max_iters {
            let gn2 = dot(&g, &g);
            if gn2.sqrt() < tol {
                break;
            }
            loop {
                let cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - lr * b).collect();
                let (tc, gc) = self.eval(&cand);
                if tc.total <= t.total - 0.25 * lr * gn2 {
                    x = cand;
                    t = tc;
                    g = gc;
                    lr *= 2.0;
                    break;
                }
                lr *= 0.5;
                if lr < 1e-20 {
                    return (x, t, gn2.sqrt(), it);
                }
            }
            it += 1;
        }
        let gn = norm(&g);
        (x, t, gn, it)
    }
}
