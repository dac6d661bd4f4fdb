use super::exact_pc::{pc_velocity, reconstruct_z_pc};
use super::scalar::run_scalar_tv;
use super::{Curve, Diagnostics, FlowTrajectory, Frame, SolverKind};
use crate::curve::{compose_with_geodesic, ScalarPc};
use crate::error::{Error, Result};
use crate::manifold::{ManifoldPoint, ManifoldSpec};

/// Flow of `γ ∘ σ0` for the geodesic γ from `p` to `q`: σ follows the scalar
/// TV flow in arc length, i.e. the staircase `dist(p,q)·σ0`.
pub fn flow_on_geodesic(
    m: ManifoldSpec,
    p: &ManifoldPoint,
    q: &ManifoldPoint,
    sigma0: &ScalarPc,
    t_max: f64,
    output_times: &[f64],
) -> Result<FlowTrajectory> {
    let len = m.dist(p, q);
    let inj = m.injectivity_radius();
    if len >= inj {
        return Err(Error::BeyondInjectivityRadius { dist: len, inj });
    }
    let arc = if len > 0.0 {
        ScalarPc::new(
            sigma0.breakpoints().to_vec(),
            sigma0.values().iter().map(|s| s * len).collect(),
        )?
    } else {
        ScalarPc::constant(0.0)
    };
    let st = run_scalar_tv(&arc, t_max, output_times);
    let mut frames = Vec::with_capacity(st.times.len());
    for ((&t, s), &diss) in st.times.iter().zip(&st.snapshots).zip(&st.dissipation) {
        let sigma = if len > 0.0 {
            ScalarPc::new(s.breakpoints().to_vec(), s.values().iter().map(|v| (v / len).clamp(0.0, 1.0)).collect())?
        } else {
            ScalarPc::constant(sigma0.values()[0])
        };
        let c = compose_with_geodesic(m, p, q, &sigma)?;
        let flat: Vec<f64> = c.values().iter().flat_map(|v| v.coords().iter().copied()).collect();
        let velocity = if c.is_constant() {
            vec![0.0; flat.len()]
        } else {
            pc_velocity(m, &flat, &c.plateau_lengths())?.0
        };
        let sizes = c.jump_sizes();
        let diag = Diagnostics {
            t,
            tv: sizes.iter().sum(),
            dissipation: diss,
            max_jump: sizes.iter().copied().fold(0.0, f64::max),
            stopped: c.is_constant(),
        };
        frames.push(Frame {
            t,
            z: Some(reconstruct_z_pc(&c)?),
            velocity: Some(velocity),
            curve: Curve::Pc(c),
            diag,
        });
    }
    Ok(FlowTrajectory { manifold: m, solver: SolverKind::Geodesic, dt: 0.0, epsilon: None, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::PiecewiseConstantCurve;
    use crate::flow::{run_exact_pc_with, ExactPcOptions};

    const S3: ManifoldSpec = ManifoldSpec::Sphere(3);

    fn e(i: usize) -> ManifoldPoint {
        let mut c = vec![0.0; 3];
        c[i] = 1.0;
        ManifoldPoint::new(S3, c).unwrap()
    }

    #[test]
    fn step_matches_exact_pc_snapshot_by_snapshot() {
        let p = e(0);
        let q = ManifoldPoint::new(S3, vec![0.6, 0.0, 0.8]).unwrap();
        let sigma = ScalarPc::new(vec![0.4], vec![0.0, 1.0]).unwrap();
        let times: Vec<f64> = (1..40).map(|k| k as f64 * 0.01).collect();
        let g = flow_on_geodesic(S3, &p, &q, &sigma, 0.4, &times).unwrap();
        let u0 = PiecewiseConstantCurve::new(S3, vec![0.4], vec![p, q]).unwrap();
        let mut o = ExactPcOptions::new(0.4);
        o.output_times = times.clone();
        let ex = run_exact_pc_with(&u0, &o).unwrap();
        let mut compared = 0;
        for &t in &times {
            let (Some(a), Some(b)) = (g.frame_at(t), ex.frame_at(t)) else { continue };
            for x in [0.1, 0.5, 0.9] {
                let d = S3.dist_raw(a.curve.value_at(x), b.curve.value_at(x));
                assert!(d < 1e-8, "t={t} x={x} d={d}");
            }
            compared += 1;
        }
        assert!(compared >= 35);
    }

    #[test]
    fn constant_sigma_is_constant() {
        let tr = flow_on_geodesic(S3, &e(0), &e(1), &ScalarPc::constant(0.5), 1.0, &[0.5]).unwrap();
        assert!(tr.frames.iter().all(|f| f.diag.stopped && f.diag.tv == 0.0));
    }

    #[test]
    fn euclidean_line_embeds_the_scalar_flow() {
        let m = ManifoldSpec::Euclidean(1);
        let p = ManifoldPoint::new(m, vec![0.0]).unwrap();
        let q = ManifoldPoint::new(m, vec![2.0]).unwrap();
        let sigma = ScalarPc::new(vec![0.3, 0.6], vec![0.0, 1.0, 0.25]).unwrap();
        let tr = flow_on_geodesic(m, &p, &q, &sigma, 0.05, &[0.05]).unwrap();
        let st = run_scalar_tv(
            &ScalarPc::new(vec![0.3, 0.6], vec![0.0, 2.0, 0.5]).unwrap(),
            0.05,
            &[0.05],
        );
        let a = tr.frame_at(0.05).unwrap();
        let s = st.snapshots.last().unwrap();
        for x in [0.1, 0.45, 0.8] {
            assert!((a.curve.value_at(x)[0] - s.value_at(x)).abs() < 1e-14);
        }
    }
}
