use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::BandLu;

use super::generator::DiscreteGenerator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub t_final: f64,
    /// Requested step; shortened so that an integer number of steps hits t_final.
    pub dt: f64,
    /// Store the nodal state every this many steps (0 stores only the first).
    pub dump_every: usize,
}

impl StepOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self { t_final, dt, dump_every: 0 }
    }

    pub fn dumping(mut self, every: usize) -> Self {
        self.dump_every = every;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Boundary traces (f_n; f_0).
    pub traces: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    /// E_{k+1} − E_k − 2·dt·v_mid*Q·v_mid per step.
    pub balance_residuals: Vec<f64>,
    pub dump_every: usize,
    /// (t, nodal f) snapshots.
    pub states: Vec<(f64, DVector<f64>)>,
    pub m: usize,
    pub nodes: Vec<f64>,
    pub h_nodes: Vec<DMatrix<f64>>,
    pub h_inv: Vec<DMatrix<f64>>,
    pub mu: Option<f64>,
}

impl Trajectory {
    pub fn initial_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Largest step increase max_k (E_{k+1} − E_k), relative to E_0.
    pub fn max_energy_increase(&self) -> f64 {
        let e0 = self.initial_energy();
        let inc = self.energies.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        if e0 > 0.0 {
            inc / e0
        } else {
            inc
        }
    }

    /// max_k |balance residual| / E_0.
    pub fn max_balance_residual(&self) -> f64 {
        let e0 = self.initial_energy();
        let r = self.balance_residuals.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
        if e0 > 0.0 {
            r / e0
        } else {
            r
        }
    }

    /// max_k |u_k + μ y_k|, zero for loops without a gain.
    pub fn feedback_residual(&self) -> f64 {
        let Some(mu) = self.mu else { return 0.0 };
        self.inputs
            .iter()
            .zip(&self.outputs)
            .map(|(u, y)| (u + y * mu).amax())
            .fold(0.0, f64::max)
    }

    /// Energy at time t by linear interpolation.
    pub fn energy_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.energies, t)
    }

    pub fn step_count(&self) -> usize {
        self.times.len() - 1
    }
}

fn interpolate(t: &[f64], v: &[f64], at: f64) -> f64 {
    match t.iter().position(|&s| s >= at) {
        None => *v.last().unwrap(),
        Some(0) => v[0],
        Some(i) => {
            let w = (at - t[i - 1]) / (t[i] - t[i - 1]);
            v[i - 1] * (1.0 - w) + v[i] * w
        }
    }
}

/// Implicit midpoint: (G − dt/2·B) c^{k+1} = (G + dt/2·B) c^k.
pub fn simulate(gen: &DiscreteGenerator, f0: &DVector<f64>, opts: StepOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || !(opts.t_final >= 0.0) || !opts.dt.is_finite() || !opts.t_final.is_finite() {
        return Err(Error::Domain(format!("need dt > 0 and t_final >= 0, got dt = {}, t_final = {}", opts.dt, opts.t_final)));
    }
    let steps = (opts.t_final / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 { opts.dt } else { opts.t_final / steps as f64 };
    let lhs = gen.gram.combine(1.0, &gen.stiffness, -0.5 * dt);
    let rhs = gen.gram.combine(1.0, &gen.stiffness, 0.5 * dt);
    let lu = BandLu::new(&lhs).ok_or_else(|| Error::Numerical("implicit midpoint matrix is singular".into()))?;

    let mut c = gen.project(f0)?;
    let cap = steps + 1;
    let mut traj = Trajectory {
        dt,
        times: Vec::with_capacity(cap),
        energies: Vec::with_capacity(cap),
        traces: Vec::with_capacity(cap),
        inputs: Vec::with_capacity(cap),
        outputs: Vec::with_capacity(cap),
        balance_residuals: Vec::with_capacity(steps),
        dump_every: opts.dump_every,
        states: Vec::new(),
        m: gen.m,
        nodes: gen.grid.nodes.clone(),
        h_nodes: gen.grid.h_nodes.clone(),
        h_inv: gen.grid.h_inv.clone(),
        mu: gen.mu,
    };
    let record = |traj: &mut Trajectory, k: usize, c: &DVector<f64>| {
        let v = gen.trace(c);
        traj.times.push(k as f64 * dt);
        traj.energies.push(gen.reduced_energy(c));
        traj.inputs.push(&gen.wb2 * &v);
        traj.outputs.push(&gen.wc * &v);
        traj.traces.push(v);
        if k == 0 || (opts.dump_every > 0 && (k % opts.dump_every == 0 || k == steps)) {
            traj.states.push((k as f64 * dt, gen.expand(c)));
        }
    };
    record(&mut traj, 0, &c);
    let mut next = DVector::zeros(c.len());
    for k in 1..=steps {
        rhs.mul_vec_into(&c, &mut next);
        lu.solve_in_place(&mut next);
        let mid = (&c + &next) * 0.5;
        let vm = gen.trace(&mid);
        std::mem::swap(&mut c, &mut next);
        record(&mut traj, k, &c);
        let e = traj.energies[k];
        if !e.is_finite() {
            return Err(Error::Numerical(format!("energy became {e} at step {k} (t = {})", k as f64 * dt)));
        }
        let balance = e - traj.energies[k - 1] - 2.0 * dt * vm.dot(&(&gen.q * &vm));
        traj.balance_residuals.push(balance);
    }
    log::debug!("simulated {steps} steps with dt = {dt:e}, E(T)/E(0) = {:e}", traj.energies[steps] / traj.energies[0]);
    Ok(traj)
}
