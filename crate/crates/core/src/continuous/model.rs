use crate::{Error, Result};

/// Controlled diffusion `dx = f(x) dt + B(x) (u dt + sigma dw)`.
///
/// Noise enters only through the control channels, and the control penalty is
/// tied to the noise by `R = lambda (sigma sigma^T)^-1`, which is what makes
/// the HJB equation linear in `Z = exp(-V / lambda)`.
pub trait DiffusionModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn control_dim(&self) -> usize;

    /// Writes `f(x)` into `out`.
    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Adds `B(x) v` to `out` for a control-space vector `v`.
    fn apply_control_matrix(&self, x: &[f64], v: &[f64], out: &mut [f64]);

    /// Diagonal of `sigma`, one entry per control channel.
    fn noise_scale(&self) -> &[f64];

    fn lambda(&self) -> f64;

    /// Diagonal of `R = lambda (sigma sigma^T)^-1`.
    fn control_penalty(&self) -> Vec<f64> {
        self.noise_scale()
            .iter()
            .map(|s| self.lambda() / (s * s))
            .collect()
    }
}

/// `(v cos phi, v sin phi, 0, 0)` for a unicycle state `(x, y, v, phi)`.
pub fn unicycle_drift(state: &[f64; 4]) -> [f64; 4] {
    let [_, _, v, phi] = *state;
    let (s, c) = phi.sin_cos();
    [v * c, v * s, 0.0, 0.0]
}

/// A team of unicycles with state `(x, y, v, phi)` per agent, controlled in
/// acceleration and turn rate. Agent `k` occupies state slots `4k..4k+4` and
/// control slots `2k..2k+2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleTeam {
    n_agents: usize,
    noise: Vec<f64>,
    lambda: f64,
}

impl UnicycleTeam {
    /// `sigma[k]` and `nu[k]` are agent `k`'s speed and heading noise levels.
    pub fn new(sigma: &[f64], nu: &[f64], lambda: f64) -> Result<Self> {
        if sigma.len() != nu.len() || sigma.is_empty() {
            return Err(Error::invalid("noise", "need one (sigma, nu) pair per agent"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        let noise: Vec<f64> = sigma.iter().zip(nu).flat_map(|(&s, &n)| [s, n]).collect();
        if noise.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::invalid("noise", "levels must be finite and nonnegative"));
        }
        Ok(Self {
            n_agents: sigma.len(),
            noise,
            lambda,
        })
    }

    pub fn uniform(n_agents: usize, sigma: f64, nu: f64, lambda: f64) -> Result<Self> {
        Self::new(&vec![sigma; n_agents], &vec![nu; n_agents], lambda)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }
}

impl DiffusionModel for UnicycleTeam {
    fn state_dim(&self) -> usize {
        4 * self.n_agents
    }

    fn control_dim(&self) -> usize {
        2 * self.n_agents
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (xs, os) in x.chunks_exact(4).zip(out.chunks_exact_mut(4)) {
            let d = unicycle_drift(&[xs[0], xs[1], xs[2], xs[3]]);
            os.copy_from_slice(&d);
        }
    }

    fn apply_control_matrix(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        for (vs, os) in v.chunks_exact(2).zip(out.chunks_exact_mut(4)) {
            os[2] += vs[0];
            os[3] += vs[1];
        }
    }

    fn noise_scale(&self) -> &[f64] {
        &self.noise
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// `dx = u dt + sigma dw` in one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Brownian1d {
    sigma: [f64; 1],
    lambda: f64,
}

impl Brownian1d {
    pub fn new(sigma: f64, lambda: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be finite and nonnegative"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        Ok(Self {
            sigma: [sigma],
            lambda,
        })
    }
}

impl DiffusionModel for Brownian1d {
    fn state_dim(&self) -> usize {
        1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn apply_control_matrix(&self, _x: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] += v[0];
    }

    fn noise_scale(&self) -> &[f64] {
        &self.sigma
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// One Euler-Maruyama step
/// `x' = x + f(x) dt + B(x) (u dt + sigma sqrt(dt) draws)`.
pub fn euler_maruyama_step(
    model: &dyn DiffusionModel,
    state: &[f64],
    control: &[f64],
    dt: f64,
    draws: &[f64],
) -> Result<Vec<f64>> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::invalid("dt", "must be positive"));
    }
    for (what, len, expected) in [
        ("state", state.len(), model.state_dim()),
        ("control", control.len(), model.control_dim()),
        ("gaussian draws", draws.len(), model.control_dim()),
    ] {
        if len != expected {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                got: len,
            });
        }
    }
    let sq = dt.sqrt();
    let v: Vec<f64> = control
        .iter()
        .zip(draws)
        .zip(model.noise_scale())
        .map(|((u, w), s)| u * dt + s * sq * w)
        .collect();
    let mut next = vec![0.0; state.len()];
    step_into(model, state, &v, dt, &mut next);
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("state after an Euler-Maruyama step".into()));
    }
    Ok(next)
}

/// `out = x + f(x) dt + B(x) v`, where `v` already holds `u dt + sigma dw`.
pub(crate) fn step_into(model: &dyn DiffusionModel, x: &[f64], v: &[f64], dt: f64, out: &mut [f64]) {
    model.drift(x, out);
    for o in out.iter_mut() {
        *o *= dt;
    }
    model.apply_control_matrix(x, v, out);
    for (o, &xi) in out.iter_mut().zip(x) {
        *o += xi;
    }
}
