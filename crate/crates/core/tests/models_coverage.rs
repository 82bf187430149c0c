//! Monte Carlo coverage of the model intervals at desk scale.

use isoci::lrt::{bw_ci, SigmaMode, BW_DEFAULT_THRESHOLD};
use isoci::models::{
    current_status_ci, glm_isotonic_ci, grenander_ci, panel_count_ci, CurrentStatusData, GlmFamily,
    GlmVarianceMode, PanelCountData, PanelSubject,
};
use isoci::par::map_indexed;
use isoci::sim::{gaussian_response, replication_rng};
use isoci::{DesignGrid, Lattice, Sample};
use rand::Rng;
use rand_distr::{Distribution, Poisson};

const C05: f64 = 2.11;

fn coverage(reps: usize, seed: u64, hit: impl Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync + Send) -> f64 {
    let hits = map_indexed(reps, None, |b| hit(&mut replication_rng(seed, b)));
    hits.iter().filter(|&&h| h).count() as f64 / reps as f64
}

fn poisson(lambda: f64, rng: &mut rand_chacha::ChaCha8Rng) -> u64 {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).unwrap().sample(rng) as u64
    }
}

#[test]
fn grenander_truncated_exponential() {
    // Exp(1) restricted to [0, 3], sampled by inversion.
    let mass = 1.0 - (-3.0f64).exp();
    let x0: f64 = 0.5;
    let truth = (-x0).exp() / mass;
    let cov = coverage(2000, 101, |rng| {
        let data: Vec<f64> = (0..500).map(|_| -(1.0 - rng.random::<f64>() * mass).ln()).collect();
        grenander_ci(&data, x0, C05).unwrap().contains(truth)
    });
    println!("grenander coverage {cov}");
    assert!((0.92..=0.975).contains(&cov), "{cov}");
}

#[test]
fn current_status_uniform() {
    let cov = coverage(2000, 102, |rng| {
        let n = 1000;
        let times: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ind: Vec<bool> = times.iter().map(|&t| rng.random::<f64>() <= t).collect();
        let data = CurrentStatusData::new(times, ind).unwrap();
        current_status_ci(&data, 0.5, C05).unwrap().contains(0.5)
    });
    println!("current status coverage {cov}");
    assert!((0.92..=0.975).contains(&cov), "{cov}");
}

#[test]
fn panel_count_poisson_process() {
    let cov = coverage(1000, 103, |rng| {
        let subjects = (0..500)
            .map(|_| {
                let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
                let (t1, t2) = (a.min(b), a.max(b));
                let n1 = poisson(2.0 * t1, rng);
                let n2 = n1 + poisson(2.0 * (t2 - t1), rng);
                PanelSubject { times: vec![t1, t2], counts: vec![n1, n2] }
            })
            .collect();
        let data = PanelCountData::new(subjects).unwrap();
        panel_count_ci(&data, 0.5, C05).unwrap().contains(1.0)
    });
    println!("panel count coverage {cov}");
    assert!((0.91..=0.98).contains(&cov), "{cov}");
}

#[test]
fn glm_poisson() {
    let n = 1000;
    let x: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let cov = coverage(2000, 104, |rng| {
        let y: Vec<f64> = x.iter().map(|&xi| poisson(1.0 + 2.0 * xi, rng) as f64).collect();
        glm_isotonic_ci(&x, &y, GlmFamily::Poisson, 0.5, C05, GlmVarianceMode::Family).unwrap().contains(2.0)
    });
    println!("poisson glm coverage {cov}");
    assert!((0.92..=0.975).contains(&cov), "{cov}");
}

#[test]
fn bw_interior_coverage() {
    let n = 1000;
    let grid = DesignGrid::Lattice(Lattice::regular(&[n]).unwrap());
    let truth: Vec<f64> = grid.points().iter().map(|p| (2.0 * p[0]).exp()).collect();
    let cov = coverage(2000, 105, |rng| {
        let y = gaussian_response(&truth, 1.0, rng);
        let s = Sample::new(grid.clone(), y).unwrap();
        bw_ci(&s, 0.5, BW_DEFAULT_THRESHOLD, SigmaMode::Known(1.0)).unwrap().contains(1f64.exp())
    });
    println!("bw coverage {cov}");
    assert!((0.93..=0.97).contains(&cov), "{cov}");
}
