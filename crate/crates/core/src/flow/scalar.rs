//! Scalar TV flow of a staircase with Neumann ends. Between collisions every
//! plateau moves at the constant speed `(ζ_right − ζ_left)/ℓ`, so the flow is
//! integrated event to event without time stepping.

use crate::curve::ScalarPc;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ScalarPc>,
    /// ∫ Σ ℓ_i σ_i'² dt since the previous snapshot.
    pub dissipation: Vec<f64>,
    /// Time at which a single plateau remained, if reached.
    pub stopped_at: Option<f64>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn speeds(v: &[f64], len: &[f64]) -> Vec<f64> {
    let k = v.len();
    (0..k)
        .map(|i| {
            let right = if i + 1 < k { sign(v[i + 1] - v[i]) } else { 0.0 };
            let left = if i > 0 { sign(v[i] - v[i - 1]) } else { 0.0 };
            (right - left) / len[i]
        })
        .collect()
}

/// Runs to `t_max`, snapshotting at every collision and at `output_times`.
pub fn run_scalar_tv(sigma0: &ScalarPc, t_max: f64, output_times: &[f64]) -> ScalarTrajectory {
    let mut b = sigma0.breakpoints().to_vec();
    let mut v = sigma0.values().to_vec();
    let mut len = sigma0.lengths();
    let mut outs: Vec<f64> = output_times.iter().copied().filter(|&t| t > 0.0 && t <= t_max).collect();
    outs.sort_by(f64::total_cmp);
    outs.dedup();
    let mut outs = outs.into_iter().peekable();

    let snap = |b: &[f64], v: &[f64]| ScalarPc::new(b.to_vec(), v.to_vec()).expect("valid staircase");
    let mut tr = ScalarTrajectory {
        times: vec![0.0],
        snapshots: vec![snap(&b, &v)],
        dissipation: vec![0.0],
        stopped_at: (v.len() == 1).then_some(0.0),
    };
    let mut t = 0.0;
    let mut diss = 0.0;
    while t < t_max {
        let s = speeds(&v, &len);
        let rate: f64 = s.iter().zip(&len).map(|(s, l)| l * s * s).sum();
        // earliest collision
        let mut tau = f64::INFINITY;
        for i in 0..v.len().saturating_sub(1) {
            let gap = v[i + 1] - v[i];
            let closing = s[i + 1] - s[i];
            if gap * closing < 0.0 {
                tau = tau.min(-gap / closing);
            }
        }
        let next_out = outs.peek().copied().unwrap_or(f64::INFINITY);
        let step = tau.min(next_out - t).min(t_max - t);
        let collided = tau <= step;
        for (vi, si) in v.iter_mut().zip(&s) {
            *vi += step * si;
        }
        t = if collided {
            t + tau
        } else if next_out - t <= t_max - t {
            next_out
        } else {
            t_max
        };
        diss += step * rate;
        if collided {
            // merge every pair that closed at this instant (length-weighted, keeps the mean)
            let scale = v.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            let mut i = v.len() - 1;
            while i > 0 {
                i -= 1;
                if (v[i + 1] - v[i]).abs() <= 1e-12 * scale {
                    let l = len[i] + len[i + 1];
                    v[i] = (len[i] * v[i] + len[i + 1] * v[i + 1]) / l;
                    len[i] = l;
                    v.remove(i + 1);
                    len.remove(i + 1);
                    b.remove(i);
                }
            }
        }
        while outs.peek().is_some_and(|&to| to <= t) {
            outs.next();
        }
        if tr.times.last() != Some(&t) {
            tr.times.push(t);
            tr.snapshots.push(snap(&b, &v));
            tr.dissipation.push(diss);
            diss = 0.0;
        }
        if v.len() == 1 {
            if tr.stopped_at.is_none() {
                tr.stopped_at = Some(t);
            }
            for to in outs.by_ref() {
                tr.times.push(to);
                tr.snapshots.push(snap(&b, &v));
                tr.dissipation.push(0.0);
            }
            break;
        }
    }
    tr
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_plateaus_meet_at_the_closed_form_time() {
        for x0 in [0.25, 0.5, 0.8] {
            let s0 = 0.7;
            let s = ScalarPc::new(vec![x0], vec![-s0, s0]).unwrap();
            let tr = run_scalar_tv(&s, 5.0, &[]);
            let t_star = tr.stopped_at.unwrap();
            assert!((t_star - 2.0 * s0 * x0 * (1.0 - x0)).abs() < 1e-14);
            let last = tr.snapshots.last().unwrap();
            assert!((last.values()[0] - s.mean()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let tr = run_scalar_tv(&ScalarPc::constant(0.3), 1.0, &[0.5]);
        assert_eq!(tr.stopped_at, Some(0.0));
        assert!(tr.snapshots.iter().all(|s| s.values() == [0.3]));
    }

    /// Brute-force oracle: tiny explicit steps of the same plateau dynamics.
    fn brute_force(s: &ScalarPc, t_end: f64, dt: f64) -> Vec<f64> {
        let len = s.lengths();
        let mut v = s.values().to_vec();
        let mut t = 0.0;
        while t < t_end {
            let sp = speeds(&v, &len);
            for (vi, si) in v.iter_mut().zip(sp) {
                *vi += dt * si;
            }
            t += dt;
        }
        v
    }

    #[test]
    fn symmetric_three_plateaus_keep_the_middle_still() {
        let s = ScalarPc::new(vec![0.3, 0.7], vec![0.0, 1.0, 0.0]).unwrap();
        let tr = run_scalar_tv(&s, 0.1, &[0.05, 0.1]);
        // middle plateau drops at speed 2/0.4, outer ones rise at 1/0.3
        let v = tr.snapshots[1].values();
        let bf = brute_force(&s, 0.05, 1e-6);
        for (a, b) in v.iter().zip(&bf) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((v[0] - v[2]).abs() < 1e-14);

        let s = ScalarPc::new(vec![0.3, 0.7], vec![0.0, 0.5, 1.0]).unwrap();
        let tr = run_scalar_tv(&s, 0.05, &[0.05]);
        // monotone staircase: the middle step does not move
        assert_eq!(tr.snapshots.last().unwrap().values()[1], 0.5);
    }

    #[test]
    fn mean_is_conserved_and_tv_decreases() {
        let s = ScalarPc::new(vec![0.1, 0.25, 0.4, 0.8], vec![0.2, 0.9, 0.1, 0.6, 0.3]).unwrap();
        let tr = run_scalar_tv(&s, 10.0, &[]);
        let mut prev = f64::INFINITY;
        for snap in &tr.snapshots {
            assert!((snap.mean() - s.mean()).abs() < 1e-12);
            assert!(snap.tv() <= prev + 1e-14);
            prev = snap.tv();
        }
        let t_star = tr.stopped_at.unwrap();
        assert!(t_star < 4.0 * s.tv());
        assert!((tr.snapshots.last().unwrap().values()[0] - s.mean()).abs() < 1e-8);
        // energy identity between events
        let acc: f64 = tr.dissipation.iter().sum();
        assert!((acc - s.tv()).abs() < 1e-12);
    }
}
