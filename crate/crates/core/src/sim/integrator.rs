//! Classical fixed-step fourth-order Runge-Kutta.

/// Scratch buffers for repeated RK4 steps on a system of fixed dimension.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + dt`, writing the result into `out`.
    /// `f(t, y, dy)` evaluates the derivative field.
    pub fn step<F>(&mut self, mut f: F, t: f64, y: &[f64], dt: f64, out: &mut [f64])
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * dt;
        f(t, y, &mut self.k1);
        for ((s, y), k) in self.tmp.iter_mut().zip(y).zip(&self.k1) {
            *s = y + half * k;
        }
        f(t + half, &self.tmp, &mut self.k2);
        for ((s, y), k) in self.tmp.iter_mut().zip(y).zip(&self.k2) {
            *s = y + half * k;
        }
        f(t + half, &self.tmp, &mut self.k3);
        for ((s, y), k) in self.tmp.iter_mut().zip(y).zip(&self.k3) {
            *s = y + dt * k;
        }
        f(t + dt, &self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for (i, o) in out.iter_mut().enumerate() {
            *o = y[i] + sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// One-off RK4 step; allocates its own scratch space.
pub fn rk4_step<F>(f: F, t: f64, y: &[f64], dt: f64, out: &mut [f64])
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    Rk4::new(y.len()).step(f, t, y, dt, out);
}
