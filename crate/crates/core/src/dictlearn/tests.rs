use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grouping::{DependenceMatrix, Neighborhoods, PatchGrouping};
use crate::linops::extract_patches;
use crate::{Complex64, ComplexImage};

fn random_patches(n: usize, atom_len: usize, seed: u64) -> GroupPatches {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * atom_len).map(|_| rng.random::<f64>() - 0.5).collect();
    GroupPatches::from_columns(atom_len, data).unwrap()
}

fn tiny_state(n: usize, atom_len: usize, k: usize, seed: u64) -> GroupState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dictionary = Dictionary::from_prior(atom_len, k, &mut rng);
    let mut codes = SparseCode::zeros(k, n);
    for i in 0..n {
        for kk in 0..k {
            codes.set(i, kk, rng.random::<f64>() < 0.6, rng.random::<f64>() * 2.0 - 1.0);
        }
    }
    let hyper = HyperState {
        pi_star: vec![0.4; n * k],
        pi: vec![0.4; n * k],
        eta: vec![0.5; k],
        gamma_s: vec![2.0; k],
        gamma_eps: 30.0,
    };
    let dep = (0..n).map(|i| vec![(i as u32, 1.0)]).collect();
    GroupState::new(dictionary, codes, hyper, HyperParams::default(), None, dep, rng).unwrap()
}

fn grouped_state(seed: u64) -> (GibbsState, crate::linops::PatchMatrix) {
    let side = 8;
    let img = ComplexImage::from_fn(side, |r, c| {
        Complex64::new(((r * 3 + c * 5) % 7) as f64 / 7.0, ((r + c) % 3) as f64 * 0.1)
    });
    let patches = extract_patches(&img, 4).unwrap();
    let assignment: Vec<u32> = (0..side * side).map(|i| ((i / side) % 2) as u32).collect();
    let grouping =
        PatchGrouping::from_parts(side, 2, assignment, vec![vec![0.0; 8]; 2], 1).unwrap();
    let nb = Neighborhoods::build(&grouping, 2.0).unwrap();
    let a = crate::grouping::build_dependence(&patches, &patches, &nb, 1.0).unwrap();
    let state = GibbsState::init(
        &grouping,
        2,
        true,
        &a,
        NeighborSystem::Spatial(&nb),
        6,
        HyperParams::default(),
        seed,
    )
    .unwrap();
    (state, patches)
}

#[test]
fn prior_atom_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = Dictionary::from_prior(16, 6250, &mut rng);
    let xs = d.as_slice();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let se = (1.0 / 16.0 / n).sqrt();
    assert!(mean.abs() < 3.0 * se, "mean {mean}");
    assert!((var * 16.0 - 1.0).abs() < 0.05, "var {var}");
}

#[test]
fn degenerate_eta_prior_starts_near_one() {
    let (state, _) = grouped_state(1);
    for g in state.groups() {
        assert!(g.hyper.eta.iter().all(|&e| e == 1.0 - ETA_EDGE));
    }
}

#[test]
fn dictionary_mean_matches_explicit_inverse() {
    let x = random_patches(5, 4, 2);
    let mut state = tiny_state(5, 4, 3, 3);
    sample_dictionary_with(&mut state, &x, DictionaryDraw::MeanOnly).unwrap();

    let xm = DMatrix::from_fn(4, 5, |p, i| x.column(i)[p]);
    let alpha = DMatrix::from_fn(3, 5, |k, i| state.codes.alpha(i, k));
    let ridge = DMatrix::<f64>::identity(3, 3) * (4.0 / state.hyper.gamma_eps);
    let inv = (&alpha * alpha.transpose() + ridge).try_inverse().unwrap();
    let oracle = &xm * alpha.transpose() * inv;
    for k in 0..3 {
        for p in 0..4 {
            let got = state.dictionary.atom(k)[p];
            assert!((got - oracle[(p, k)]).abs() < 1e-10, "({p},{k}) {got} vs {}", oracle[(p, k)]);
        }
    }
}

#[test]
fn unused_codes_give_prior_dictionary_mean() {
    let x = random_patches(5, 4, 2);
    let mut state = tiny_state(5, 4, 3, 3);
    state.codes = SparseCode::zeros(3, 5);
    sample_dictionary_with(&mut state, &x, DictionaryDraw::MeanOnly).unwrap();
    assert!(state.dictionary.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn single_atom_regression_limit() {
    // one active atom, many patches, near-noiseless: the mean column is the
    // scalar least-squares fit X sᵀ / (s sᵀ)
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 400;
    let x = random_patches(n, 4, 5);
    let mut state = tiny_state(n, 4, 1, 6);
    let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.5).collect();
    for (i, &si) in s.iter().enumerate() {
        state.codes.set(i, 0, true, si);
    }
    state.hyper.gamma_eps = 1e6;
    sample_dictionary_with(&mut state, &x, DictionaryDraw::MeanOnly).unwrap();
    let ss: f64 = s.iter().map(|v| v * v).sum();
    for p in 0..4 {
        let xs: f64 = (0..n).map(|i| x.column(i)[p] * s[i]).sum();
        let ls = xs / ss;
        let got = state.dictionary.atom(0)[p];
        assert!((got - ls).abs() <= 0.01 * ls.abs().max(1e-3), "{got} vs {ls}");
    }
}

#[test]
fn zero_probability_never_activates() {
    let x = random_patches(6, 4, 7);
    let mut state = tiny_state(6, 4, 3, 8);
    state.hyper.pi.fill(0.0);
    for _ in 0..50 {
        sample_codes(&mut state, &x).unwrap();
        assert_eq!(state.active_atoms(), 0);
    }
    state.hyper.pi.fill(1.0);
    sample_codes(&mut state, &x).unwrap();
    assert!(state.codes.z.iter().all(|&z| z));
}

#[test]
fn pi_is_convex_combination_of_pi_star() {
    let (mut state, patches) = grouped_state(3);
    for _ in 0..3 {
        gibbs_sweep(&mut state, &patches).unwrap();
        for g in state.groups() {
            assert!(g.hyper.pi.iter().all(|p| (0.0..=1.0).contains(p)));
            assert!(g.hyper.pi_star.iter().all(|p| *p > 0.0 && *p < 1.0));
            assert!(g.hyper.eta.iter().all(|p| *p > 0.0 && *p < 1.0));
            assert!(g.hyper.gamma_s.iter().all(|v| *v > 0.0 && v.is_finite()));
            assert!(g.hyper.gamma_eps > 0.0 && g.hyper.gamma_eps.is_finite());
            let k = g.num_atoms();
            for i in 0..g.num_patches() {
                let want: Vec<f64> = (0..k)
                    .map(|kk| {
                        g.dependence
                            .row(i)
                            .iter()
                            .map(|&(l, a)| a * g.hyper.pi_star[l as usize * k + kk])
                            .sum::<f64>()
                    })
                    .collect();
                for kk in 0..k {
                    assert!((g.hyper.pi[i * k + kk] - want[kk]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn alpha_vanishes_off_support() {
    let (mut state, patches) = grouped_state(4);
    gibbs_sweep(&mut state, &patches).unwrap();
    for g in state.groups() {
        for i in 0..g.num_patches() {
            for k in 0..g.num_atoms() {
                let a = g.codes.alpha(i, k);
                if g.codes.z(i, k) {
                    assert_eq!(a, g.codes.s(i, k));
                } else {
                    assert_eq!(a, 0.0);
                }
            }
        }
    }
}

#[test]
fn sweeps_are_deterministic() {
    let (mut a, patches) = grouped_state(5);
    let (mut b, _) = grouped_state(5);
    for _ in 0..4 {
        gibbs_sweep(&mut a, &patches).unwrap();
        gibbs_sweep(&mut b, &patches).unwrap();
    }
    assert_eq!(a, b);
    let (mut c, _) = grouped_state(6);
    gibbs_sweep(&mut c, &patches).unwrap();
    assert_ne!(a.groups()[0].dictionary, c.groups()[0].dictionary);
}

#[test]
fn group_order_does_not_matter() {
    let (mut joint, patches) = grouped_state(7);
    let (mut separate, _) = grouped_state(7);
    gibbs_sweep(&mut joint, &patches).unwrap();
    let members = separate.members().to_vec();
    for j in (0..separate.num_groups()).rev() {
        let x = GroupPatches::gather(&patches, &members[j]);
        group_sweep(&mut separate.groups_mut()[j], &x).unwrap();
    }
    assert_eq!(joint.groups(), separate.groups());
}

#[test]
fn active_atoms_never_exceed_initial_size() {
    let (mut state, patches) = grouped_state(8);
    for _ in 0..5 {
        let stats = gibbs_sweep(&mut state, &patches).unwrap();
        assert!(stats.active_atoms.iter().all(|&a| a <= 6));
    }
}

#[test]
fn zero_codes_give_zero_image() {
    let (mut state, _) = grouped_state(9);
    for g in state.groups_mut() {
        g.codes = SparseCode::zeros(g.num_atoms(), g.num_patches());
    }
    let img = code_image(&state);
    assert!(img.as_slice().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
}

#[test]
fn code_image_matches_dense_operator() {
    let (mut state, patches) = grouped_state(10);
    gibbs_sweep(&mut state, &patches).unwrap();
    let side = 8;
    let n = side * side;
    let ps = 2;
    let l = ps * ps;
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for i in 0..n {
        // explicit L × n selection matrix of patch i
        let (r0, c0) = (i / side, i % side);
        let mut sel = DMatrix::<f64>::zeros(l, n);
        for dr in 0..ps {
            for dc in 0..ps {
                sel[(dr * ps + dc, ((r0 + dr) % side) * side + (c0 + dc) % side)] = 1.0;
            }
        }
        let g = &state.groups()[state.assignment()[i] as usize];
        let alpha = state.alpha(i);
        let mut v = vec![0.0; 2 * l];
        for (k, a) in alpha.iter().enumerate() {
            for (vp, d) in v.iter_mut().zip(g.dictionary.atom(k)) {
                *vp += a * d;
            }
        }
        let vr = DMatrix::from_column_slice(l, 1, &v[..l]);
        let vi = DMatrix::from_column_slice(l, 1, &v[l..]);
        let br = sel.transpose() * vr;
        let bi = sel.transpose() * vi;
        for p in 0..n {
            re[p] += br[(p, 0)];
            im[p] += bi[(p, 0)];
        }
    }
    let img = code_image(&state);
    for p in 0..n {
        let got = img.as_slice()[p];
        assert!((got.re - re[p]).abs() < 1e-12 && (got.im - im[p]).abs() < 1e-12);
    }
}

#[test]
fn single_patch_code_lands_on_footprint() {
    let (mut state, _) = grouped_state(11);
    for g in state.groups_mut() {
        g.codes = SparseCode::zeros(g.num_atoms(), g.num_patches());
    }
    // patch at (7, 7) wraps to the four corners
    let target = 63;
    let j = state.assignment()[target] as usize;
    let li = state.local_index[target] as usize;
    state.groups_mut()[j].codes.set(li, 2, true, 1.0);
    let atom = state.groups()[j].dictionary.atom(2).to_vec();
    let img = code_image(&state);
    let footprint = [63, 56, 7, 0];
    for (p, &px) in footprint.iter().enumerate() {
        assert_eq!(img.as_slice()[px], Complex64::new(atom[p], atom[4 + p]));
    }
    let nonzero = img.as_slice().iter().filter(|v| v.norm() > 0.0).count();
    assert!(nonzero <= 4);
}

#[test]
fn zero_residual_noise_precision_uses_prior_rate() {
    let mut state = tiny_state(4, 4, 2, 12);
    state.codes = SparseCode::zeros(2, 4);
    let x = GroupPatches::from_columns(4, vec![0.0; 16]).unwrap();
    let mut draws = Vec::new();
    for _ in 0..20_000 {
        draws.push(sample_noise_precision(&mut state, &x).unwrap());
    }
    let shape = 1.0 + 0.5 * 16.0;
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((mean - shape).abs() < 0.1, "mean {mean}");
}

#[test]
fn rejects_non_finite_patches() {
    assert!(GroupPatches::from_columns(2, vec![0.0, f64::NAN]).is_err());
    let (mut state, mut patches) = grouped_state(13);
    patches.column_mut(3)[0] = f64::INFINITY;
    assert!(gibbs_sweep(&mut state, &patches).is_err());
}

#[test]
fn dependence_swap_refreshes_pi() {
    let (mut state, _) = grouped_state(14);
    state.set_dependence(&DependenceMatrix::identity(64)).unwrap();
    for g in state.groups() {
        assert_eq!(g.hyper.pi, g.hyper.pi_star);
    }
}

#[test]
fn cross_group_dependence_is_rejected() {
    let (mut state, _) = grouped_state(15);
    let rows = (0..64u32).map(|i| vec![(i, 0.5), ((i + 8) % 64, 0.5)]).collect();
    let a = DependenceMatrix::from_rows(rows, 1.0, 10.0).unwrap();
    assert!(state.set_dependence(&a).is_err());
}
