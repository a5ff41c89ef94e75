#![allow(dead_code)]

use atlanta_core::bounds::{Branch, DomainKind};
use atlanta_core::geometry::{angle_between_precise, sphere_to_exp, sphere_to_scs, sphere_to_stereo};
use atlanta_core::synth::random_unit;
use atlanta_core::UnitVec3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng) -> UnitVec3 {
    random_unit(rng)
}

pub fn upper_unit(rng: &mut ChaCha8Rng) -> UnitVec3 {
    random_unit(rng).upper()
}

pub const KINDS: [DomainKind; 4] = [
    DomainKind::ExpSquare,
    DomainKind::SteSquare,
    DomainKind::ScsRect,
    DomainKind::RotCube,
];

/// Domain point whose preimage is `v` (upper hemisphere input).
pub fn domain_point(kind: DomainKind, v: &UnitVec3) -> [f64; 3] {
    match kind {
        DomainKind::ExpSquare => {
            let d = sphere_to_exp(v).unwrap();
            [d.d1, d.d2, 0.0]
        }
        DomainKind::SteSquare => {
            let k = sphere_to_stereo(v).unwrap();
            [k.k1, k.k2, 0.0]
        }
        DomainKind::ScsRect => {
            let h = sphere_to_scs(v).unwrap();
            [h.azimuth, h.elevation, 0.0]
        }
        DomainKind::RotCube => {
            // rotation taking e3 to v about the axis e3 x v
            let axis = UnitVec3::e3().cross(v);
            let s = axis.norm();
            if s < 1e-15 {
                return [0.0; 3];
            }
            let angle = v.z().clamp(-1.0, 1.0).acos();
            [axis.x / s * angle, axis.y / s * angle, axis.z / s * angle]
        }
    }
}

/// Cell of the solver's subdivision tree at `depth`, following `target` when
/// given and random children otherwise.
pub fn cell(rng: &mut ChaCha8Rng, kind: DomainKind, depth: u32, target: Option<[f64; 3]>) -> Branch {
    let mut b = Branch::root(kind);
    for _ in 0..depth {
        let children = b.subdivide();
        b = match target {
            Some(t) => *children.iter().find(|c| c.contains(t)).unwrap_or(&children[0]),
            None => children[rng.random_range(0..children.len())],
        };
    }
    b
}

/// Uniform point of the branch box.
pub fn sample_point(rng: &mut ChaCha8Rng, b: &Branch) -> [f64; 3] {
    b.local_point(std::array::from_fn(|_| rng.random_range(-1.0..=1.0)))
}

/// Min and max angle between `n` and the preimage of a 2D branch: a 100 x 100
/// grid over the closed box, then compass search from the best few grid
/// points of each kind.
pub fn range_oracle(b: &Branch, n: &UnitVec3) -> (f64, f64) {
    const GRID: usize = 100;
    let angle_at = |u: [f64; 2]| angle_between_precise(&b.preimage(b.local_point([u[0], u[1], 0.0])), n);
    let mut samples = Vec::with_capacity(GRID * GRID);
    for i in 0..GRID {
        for j in 0..GRID {
            let u = [
                -1.0 + 2.0 * i as f64 / (GRID - 1) as f64,
                -1.0 + 2.0 * j as f64 / (GRID - 1) as f64,
            ];
            samples.push((angle_at(u), u));
        }
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step = 2.0 / (GRID - 1) as f64;
    let lo = samples[..4]
        .iter()
        .map(|s| compass(&angle_at, s.1, step, 1.0))
        .fold(f64::INFINITY, f64::min);
    let hi = samples[samples.len() - 4..]
        .iter()
        .map(|s| compass(&angle_at, s.1, step, -1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    (lo.min(samples[0].0), hi.max(samples[samples.len() - 1].0))
}

/// Minimizes `sign * f` over `[-1, 1]^2` by compass search; returns `f` there.
fn compass(f: &impl Fn([f64; 2]) -> f64, start: [f64; 2], mut step: f64, sign: f64) -> f64 {
    let mut u = start;
    let mut best = sign * f(u);
    while step > 1e-13 {
        let mut moved = false;
        for (axis, dir) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
            let mut w = u;
            w[axis] = (w[axis] + dir * step).clamp(-1.0, 1.0);
            let val = sign * f(w);
            if val < best {
                best = val;
                u = w;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    sign * best
}
