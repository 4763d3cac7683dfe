use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{GroundTruth, PathTruth, Scene, SceneError, Snapshot, SnapshotTrace, TraceHeader};
use crate::dsp::FrequencyResponse;
use crate::SPEED_OF_LIGHT;

/// Synthesizes the multi-tone response at time `t`.
///
/// Each point return contributes `a·exp(−j2π f_k τ)` with `τ = 2d/c` and
/// `a = Γ/(c·τ)`; complex white Gaussian noise at the scene floor is added
/// from a random stream keyed by `(seed, t)`.
pub fn synthesize_snapshot(
    scene: &Scene,
    t: f64,
) -> Result<(FrequencyResponse, GroundTruth), SceneError> {
    if !(0.0..=scene.duration).contains(&t) {
        return Err(SceneError::TimeOutOfRange {
            t,
            duration: scene.duration,
        });
    }
    let sounding = &scene.sounding;
    let n = sounding.n_tones;
    let max_delay = sounding.max_unambiguous_delay();
    let origin = scene.platform_position(t);

    let mut truth = Vec::with_capacity(scene.scatterers.len());
    let mut returns: Vec<(f64, f64)> = Vec::new();
    for s in &scene.scatterers {
        let p = s.track.position(t);
        let d = (p[0] - origin[0]).hypot(p[1] - origin[1]);
        let delay = 2.0 * d / SPEED_OF_LIGHT;
        let amplitude = s.reflectivity / (SPEED_OF_LIGHT * delay);
        for off in s.depth_offsets() {
            let tau = 2.0 * (d + off) / SPEED_OF_LIGHT;
            if !(tau > 0.0) || tau >= max_delay {
                return Err(SceneError::AmbiguousDelay {
                    label: s.label.clone(),
                    delay: tau,
                    max: max_delay,
                });
            }
            returns.push((tau, amplitude));
        }
        truth.push(PathTruth {
            label: s.label.clone(),
            delay,
            amplitude,
        });
    }

    let mut samples = vec![Complex64::new(0.0, 0.0); n];
    for (k, h) in samples.iter_mut().enumerate() {
        let f = sounding.tone_frequency(k);
        for &(tau, a) in &returns {
            let (sin, cos) = (-2.0 * PI * f * tau).sin_cos();
            *h += Complex64::new(a * cos, a * sin);
        }
    }

    let noise = scene.noise_power();
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
        rng.set_stream(t.to_bits());
        let sigma = (noise / 2.0).sqrt();
        for h in samples.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *h += Complex64::new(sigma * re, sigma * im);
        }
    }

    Ok((
        FrequencyResponse {
            snapshot_time: t,
            samples,
        },
        truth,
    ))
}

/// Runs the scene over `⌊duration·rate⌋ + 1` uniformly spaced snapshots.
pub fn run_scene(scene: &Scene) -> Result<SnapshotTrace, SceneError> {
    scene.validate()?;
    let snapshots = (0..scene.snapshot_count())
        .into_par_iter()
        .map(|i| {
            let t = scene.snapshot_time(i).min(scene.duration);
            synthesize_snapshot(scene, t).map(|(response, truth)| Snapshot {
                response,
                truth: Some(truth),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SnapshotTrace {
        header: TraceHeader {
            trace_id: scene.id.clone(),
            snapshot_rate: scene.snapshot_rate,
            sounding: scene.sounding,
        },
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Scatterer, Track, DEFAULT_SPEED_MPS};

    fn static_scene(points: &[(f64, f64)]) -> Scene {
        let scatterers = points
            .iter()
            .map(|&(x, g)| Scatterer::point("s", g, Track::fixed(x, 0.0)))
            .collect();
        let mut s = Scene::new("t", scatterers);
        s.platform = Some(Track::fixed(0.0, 0.0));
        s
    }

    #[test]
    fn delay_of_three_metres() {
        let (_, truth) = synthesize_snapshot(&static_scene(&[(3.0, 1.0)]), 0.0).unwrap();
        assert!((truth[0].delay - 20.014e-9).abs() < 1e-12);
        assert!((truth[0].delay - 2.0 * 3.0 / SPEED_OF_LIGHT).abs() <= 1e-15);
    }

    #[test]
    fn empty_scene_is_silent() {
        let (fr, truth) = synthesize_snapshot(&static_scene(&[]), 1.0).unwrap();
        assert!(truth.is_empty());
        assert!(fr.samples.iter().all(|h| h.norm() == 0.0));
    }

    #[test]
    fn out_of_range_time() {
        let s = static_scene(&[(3.0, 1.0)]);
        assert!(matches!(
            synthesize_snapshot(&s, 61.0),
            Err(SceneError::TimeOutOfRange { .. })
        ));
        assert!(synthesize_snapshot(&s, -0.1).is_err());
    }

    #[test]
    fn ambiguous_delay_rejected() {
        // 1 µs unambiguous range ⇔ 149.9 m one way
        let s = static_scene(&[(160.0, 1.0)]);
        assert!(matches!(
            synthesize_snapshot(&s, 0.0),
            Err(SceneError::AmbiguousDelay { .. })
        ));
    }

    #[test]
    fn receding_delay_rate() {
        // Default platform drives +x at 20 km/h; scatterer behind it.
        let scene = Scene::new(
            "r",
            vec![Scatterer::point("b", 1.0, Track::fixed(-10.0, 0.0))],
        );
        let analytic = 2.0 * DEFAULT_SPEED_MPS / SPEED_OF_LIGHT;
        assert!((analytic * 1e9 - 37.06).abs() < 0.01);
        let h = 1e-3;
        let d = |t| synthesize_snapshot(&scene, t).unwrap().1[0].delay;
        let fd = (d(5.0 + h) - d(5.0 - h)) / (2.0 * h);
        assert!(
            (fd - analytic).abs() / analytic < 1e-6,
            "{fd} vs {analytic}"
        );
    }

    #[test]
    fn amplitude_halves_with_doubled_distance() {
        let (_, t) = synthesize_snapshot(&static_scene(&[(5.0, 0.7), (10.0, 0.7)]), 0.0).unwrap();
        assert!((t[0].amplitude / t[1].amplitude - 2.0).abs() < 1e-12);
    }

    #[test]
    fn snapshot_counts() {
        let mut s = static_scene(&[(3.0, 1.0)]);
        s.sounding.n_tones = 11;
        s.sounding.bandwidth = 10e6;
        assert_eq!(run_scene(&s).unwrap().len(), 938);
        s.duration = 0.0;
        let tr = run_scene(&s).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.snapshots[0].response.snapshot_time, 0.0);
    }

    #[test]
    fn noise_is_seeded() {
        let mut s = static_scene(&[(3.0, 0.5)]);
        s.noise_floor_db = Some(-30.0);
        s.duration = 1.0;
        s.sounding.n_tones = 64;
        let a = run_scene(&s).unwrap();
        let b = run_scene(&s).unwrap();
        assert_eq!(a, b);
        s.rng_seed = 1;
        assert_ne!(a, run_scene(&s).unwrap());
    }
}
