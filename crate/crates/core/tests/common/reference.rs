//! Straightforward dense-matrix RK4 for the two-phase model, used as an
//! independent reference. State is `[I_0..I_{N-1}, R_0..R_{N-1}, loss]`.

use virus_damage::{ModelParams, Network};

pub struct Reference {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

fn dense(net: &Network) -> Vec<Vec<f64>> {
    let n = net.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        for &j in net.in_neighbors(i) {
            row[j] = 1.0;
        }
    }
    a
}

fn rhs(a: &[Vec<f64>], p: &ModelParams, after_release: bool, y: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut dy = vec![0.0; 2 * n + 1];
    for i in 0..n {
        let pressure: f64 = (0..n).map(|j| a[i][j] * y[j]).sum();
        let (inf, rec) = (y[i], y[n + i]);
        if after_release {
            let s = 1.0 - inf - rec;
            dy[i] = p.beta * s * pressure - p.gamma * inf;
            dy[n + i] = p.theta * s + p.gamma * inf;
        } else {
            dy[i] = p.beta * (1.0 - inf) * pressure;
        }
        dy[2 * n] += inf;
    }
    dy
}

/// Integrates with `steps_before` equal steps on `[0, tau]` and `steps_after`
/// on `[tau, T]`, recording every `record_every` steps of each leg. Updates use
/// compensated summation.
pub fn integrate(net: &Network, p: &ModelParams, i0: &[f64], steps_before: usize, steps_after: usize, record_every: usize) -> Reference {
    let a = dense(net);
    let n = net.node_count();
    let mut y = vec![0.0; 2 * n + 1];
    y[..n].copy_from_slice(i0);
    let mut carry = vec![0.0; y.len()];
    let mut out = Reference { times: vec![0.0], states: vec![y.clone()] };

    for (t0, t1, steps, after) in [(0.0, p.tau, steps_before, false), (p.tau, p.horizon, steps_after, true)] {
        let h = (t1 - t0) / steps as f64;
        for s in 1..=steps {
            let k1 = rhs(&a, p, after, &y);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(v, k)| v + 0.5 * h * k).collect();
            let k2 = rhs(&a, p, after, &y2);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(v, k)| v + 0.5 * h * k).collect();
            let k3 = rhs(&a, p, after, &y3);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(v, k)| v + h * k).collect();
            let k4 = rhs(&a, p, after, &y4);
            for m in 0..y.len() {
                let inc = h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]) - carry[m];
                let next = y[m] + inc;
                carry[m] = (next - y[m]) - inc;
                y[m] = next;
            }
            if s % record_every == 0 {
                out.times.push(t0 + s as f64 * h);
                out.states.push(y.clone());
            }
        }
    }
    out
}
