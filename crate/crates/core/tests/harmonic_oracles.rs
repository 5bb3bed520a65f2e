mod common;

use std::f64::consts::PI;

use common::*;
use num_complex::Complex;
use rand::Rng;
use spherevlad::harmonic::correlate::{s2_correlate_coeffs, so3_correlate_coeffs, symmetrize_s2, symmetrize_so3};
use spherevlad::harmonic::rotation::{apply, euler_to_matrix, matmul, rotate_s2_coefficients, transpose};
use spherevlad::harmonic::{
    block_index, quadrature, rotate_s2, rotate_so3, s2_correlate, s2_index, sht_forward, sht_inverse, so3_correlate,
    so3_forward, so3_inverse, so3_len, wigner_big_d, RotationSpec, S2Coefficients, S2FilterBank, S2Grid,
    So3Coefficients, So3FeatureMap, So3FilterBank,
};

fn grid_of(c: &S2Coefficients<f64>) -> S2Grid<f64> {
    sht_inverse(c)
}

#[test]
fn synthesis_basis_matches_legendre_harmonics() {
    let mut r = rng(1);
    let c = random_s2(&mut r, 5);
    let fast = sht_inverse(&c);
    let slow = sample_s2(&c, 5);
    assert!(max_abs_diff(&fast.data, &slow) < 1e-12);
}

#[test]
fn rotated_harmonic_identity() {
    // Y_l^m(R⁻¹x) = Σ_{m'} Y_l^{m'}(x) D^l_{m'm}(R)
    let rot = RotationSpec::Euler { alpha: 0.7, beta: 1.3, gamma: -2.1 };
    let rinv = transpose(&rot.matrix());
    let lmax = 5;
    let big = wigner_big_d(lmax, &rot);
    for &(beta, alpha) in &[(0.4, 1.0), (2.0, -2.5), (1.5, 0.3)] {
        let x = direction(beta, alpha);
        let (b2, a2) = to_polar(apply(&rinv, x));
        for l in 0..lmax {
            let li = l as i64;
            for m in -li..=li {
                let lhs = ylm(l, m, b2, a2);
                let rhs: Complex<f64> = (-li..=li)
                    .map(|mp| ylm(l, mp, beta, alpha) * big[block_index(l, mp, m)])
                    .sum();
                assert!((lhs - rhs).norm() < 1e-12, "l={l} m={m}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn constant_signal_has_only_monopole() {
    let b = 6;
    let grid = S2Grid { bandwidth: b, data: vec![2.5; 4 * b * b] };
    let c = sht_forward(&grid).unwrap();
    assert!((c.get(0, 0).re - 2.5 * (4.0 * PI).sqrt()).abs() < 1e-12);
    for (i, z) in c.data.iter().enumerate().skip(1) {
        assert!(z.norm() < 1e-12, "coefficient {i} = {z}");
    }
}

#[test]
fn real_part_of_y21_transforms_to_two_halves() {
    // Re Y_2^1 = (Y_2^1 − Y_2^{−1}) / 2
    let b = 4;
    let n = 2 * b;
    let mut data = vec![0.0; n * n];
    for a in 0..n {
        for k in 0..n {
            data[a * n + k] = ylm(2, 1, quadrature::beta(b, k), quadrature::alpha(b, a)).re;
        }
    }
    let c = sht_forward(&S2Grid { bandwidth: b, data }).unwrap();
    for l in 0..b {
        for m in -(l as i64)..=(l as i64) {
            let expect = match (l, m) {
                (2, 1) => 0.5,
                (2, -1) => -0.5,
                _ => 0.0,
            };
            assert!((c.get(l, m) - Complex::new(expect, 0.0)).norm() < 1e-10, "({l},{m})");
        }
    }
}

#[test]
fn single_dipole_coefficient_is_cos_beta() {
    let b = 4;
    let mut c = S2Coefficients::zeros(b);
    c.data[s2_index(1, 0)] = Complex::new(1.0, 0.0);
    let g = sht_inverse(&c);
    let k = (3.0 / (4.0 * PI)).sqrt();
    for a in 0..2 * b {
        for j in 0..2 * b {
            assert!((g.at(a, j) - k * quadrature::beta(b, j).cos()).abs() < 1e-14);
        }
    }
    let zero = sht_inverse(&S2Coefficients::<f64>::zeros(b));
    assert!(zero.data.iter().all(|&v| v == 0.0));
}

#[test]
fn sht_round_trips() {
    let mut r = rng(2);
    for b in [8, 16] {
        let c = random_s2(&mut r, b);
        let back = sht_forward(&sht_inverse(&c)).unwrap();
        let err = c.data.iter().zip(&back.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let scale = c.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err / scale < 1e-10, "b={b}: {err}");
        // grid → coefficients → grid
        let g = sht_inverse(&c);
        let g2 = sht_inverse(&sht_forward(&g).unwrap());
        assert!(rel_err(&g2.data, &g.data) < 1e-10);
    }
}

#[test]
fn sht_plancherel_and_linearity() {
    let mut r = rng(3);
    let b = 6;
    let (c1, c2) = (random_s2(&mut r, b), random_s2(&mut r, b));
    let (g1, g2) = (grid_of(&c1), grid_of(&c2));
    // grid inner product by quadrature vs coefficient inner product
    let w = quadrature::weights(b);
    let n = 2 * b;
    let mut grid_ip = 0.0;
    for a in 0..n {
        for k in 0..n {
            grid_ip += w[k] * (2.0 * PI / n as f64) * g1.at(a, k) * g2.at(a, k);
        }
    }
    let coef_ip: f64 = c1.data.iter().zip(&c2.data).map(|(x, y)| (x * y.conj()).re).sum();
    assert!((grid_ip - coef_ip).abs() < 1e-9 * coef_ip.abs().max(1.0));

    let (a, bb) = (0.7, -1.9);
    let combo = S2Grid { bandwidth: b, data: g1.data.iter().zip(&g2.data).map(|(x, y)| a * x + bb * y).collect() };
    let lhs = sht_forward(&combo).unwrap();
    let f1 = sht_forward(&g1).unwrap();
    let f2 = sht_forward(&g2).unwrap();
    for i in 0..lhs.data.len() {
        assert!((lhs.data[i] - (f1.data[i] * a + f2.data[i] * bb)).norm() < 1e-10);
    }
}

#[test]
fn so3_round_trip_and_zero() {
    let mut r = rng(4);
    let b = 4;
    let c = random_so3(&mut r, b);
    let grid = so3_inverse(&c, b);
    let back = so3_forward(&grid, b, b).unwrap();
    let err = c.data.iter().zip(&back.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");

    let zero = so3_forward(&vec![0.0; 512], 4, 4).unwrap();
    assert!(zero.data.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn so3_synthesis_matches_pointwise_wigner() {
    let mut r = rng(5);
    let b = 3;
    let c = random_so3(&mut r, b);
    let grid = so3_inverse(&c, b);
    let n = 2 * b;
    for a in 0..n {
        for k in 0..n {
            for g in 0..n {
                let m = euler_to_matrix(quadrature::alpha(b, a), quadrature::beta(b, k), quadrature::alpha(b, g));
                let v = eval_so3(&c, &m);
                assert!((grid[(a * n + k) * n + g] - v).abs() < 1e-11);
            }
        }
    }
}

#[test]
fn sampled_wigner_function_has_single_block_entry() {
    // Re conj(D^2_{1,−1}) has coefficient 1/2 at (1,−1) and (−1)^{2}/2 at (−1,1).
    let b = 4;
    let n = 2 * b;
    let mut grid = vec![0.0; n * n * n];
    for a in 0..n {
        for k in 0..n {
            for g in 0..n {
                let m = euler_to_matrix(quadrature::alpha(b, a), quadrature::beta(b, k), quadrature::alpha(b, g));
                grid[(a * n + k) * n + g] = big_d(2, 1, -1, &m).conj().re;
            }
        }
    }
    let c = so3_forward(&grid, b, b).unwrap();
    for l in 0..b {
        let li = l as i64;
        for m in -li..=li {
            for nn in -li..=li {
                let expect = if l == 2 && ((m, nn) == (1, -1) || (m, nn) == (-1, 1)) { 0.5 } else { 0.0 };
                assert!((c.get(l, m, nn) - Complex::new(expect, 0.0)).norm() < 1e-10, "({l},{m},{nn})");
            }
        }
    }
}

#[test]
fn so3_plancherel() {
    let mut r = rng(6);
    let b = 4;
    let (c1, c2) = (random_so3(&mut r, b), random_so3(&mut r, b));
    let (g1, g2) = (so3_inverse(&c1, b), so3_inverse(&c2, b));
    let w = quadrature::weights(b);
    let n = 2 * b;
    let da = 2.0 * PI / n as f64;
    let mut grid_ip = 0.0;
    for a in 0..n {
        for k in 0..n {
            for g in 0..n {
                let i = (a * n + k) * n + g;
                grid_ip += w[k] * da * da * g1[i] * g2[i];
            }
        }
    }
    let mut coef_ip = 0.0;
    for l in 0..b {
        let w = 2 * l + 1;
        let s = 8.0 * PI * PI / w as f64;
        let off = so3_len(l);
        for i in 0..w * w {
            coef_ip += s * (c1.data[off + i] * c2.data[off + i].conj()).re;
        }
    }
    assert!((grid_ip - coef_ip).abs() < 1e-9 * coef_ip.abs().max(1.0), "{grid_ip} vs {coef_ip}");
}

fn random_s2_bank(r: &mut rand_chacha::ChaCha8Rng, c_out: usize, c_in: usize, b: usize) -> S2FilterBank<f64> {
    let raw: Vec<Complex<f64>> = (0..c_out * c_in * b * b)
        .map(|_| Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    S2FilterBank { c_out, c_in, bandwidth: b, coeffs: symmetrize_s2(&raw, b) }
}

fn random_so3_bank(r: &mut rand_chacha::ChaCha8Rng, c_out: usize, c_in: usize, b: usize) -> So3FilterBank<f64> {
    let raw: Vec<Complex<f64>> = (0..c_out * c_in * so3_len(b))
        .map(|_| Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    So3FilterBank { c_out, c_in, bandwidth: b, coeffs: symmetrize_so3(&raw, b) }
}

#[test]
fn s2_correlation_matches_direct_quadrature() {
    let mut r = rng(7);
    for b in [2usize, 3] {
        let f = random_s2(&mut r, b);
        let grid = grid_of(&f);
        let bank = random_s2_bank(&mut r, 1, 1, b);
        let psi = S2Coefficients { bandwidth: b, data: bank.coeffs.clone() };
        let out = s2_correlate(&[grid.clone()], &bank).unwrap();
        let n = 2 * b;
        let w = quadrature::weights(b);
        let mut direct = vec![0.0; n * n * n];
        for a in 0..n {
            for k in 0..n {
                for g in 0..n {
                    let rm = euler_to_matrix(quadrature::alpha(b, a), quadrature::beta(b, k), quadrature::alpha(b, g));
                    let rinv = transpose(&rm);
                    let mut acc = 0.0;
                    for qa in 0..n {
                        for qk in 0..n {
                            let x = direction(quadrature::beta(b, qk), quadrature::alpha(b, qa));
                            let (pb, pa) = to_polar(apply(&rinv, x));
                            acc += w[qk] * (2.0 * PI / n as f64) * grid.at(qa, qk) * eval_s2(&psi, pb, pa);
                        }
                    }
                    direct[(a * n + k) * n + g] = acc;
                }
            }
        }
        let err = rel_err(out.channel(0), &direct);
        assert!(err < 1e-10, "b={b}: {err}");
    }
}

#[test]
fn so3_correlation_matches_direct_quadrature() {
    let mut r = rng(8);
    let b = 2;
    let gc = random_so3(&mut r, b);
    let bank = random_so3_bank(&mut r, 1, 1, b);
    let psi = So3Coefficients { bandwidth: b, data: bank.coeffs.clone() };
    let g = So3FeatureMap { channels: 1, bandwidth: b, data: so3_inverse(&gc, b) };
    let out = so3_correlate(&g, &bank, None).unwrap();
    let n = 2 * b;
    let w = quadrature::weights(b);
    let da = 2.0 * PI / n as f64;
    let rots: Vec<_> = (0..n * n * n)
        .map(|i| {
            let (a, k, gg) = (i / (n * n), (i / n) % n, i % n);
            euler_to_matrix(quadrature::alpha(b, a), quadrature::beta(b, k), quadrature::alpha(b, gg))
        })
        .collect();
    let mut direct = vec![0.0; n * n * n];
    for (i, rm) in rots.iter().enumerate() {
        let rinv = transpose(rm);
        let mut acc = 0.0;
        for (j, qm) in rots.iter().enumerate() {
            let k = (j / n) % n;
            acc += w[k] * da * da * eval_so3(&psi, &matmul(&rinv, qm)) * g.data[j];
        }
        direct[i] = acc;
    }
    let err = rel_err(&out.data, &direct);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn correlations_are_equivariant() {
    let mut r = rng(9);
    let b = 5;
    let rot = RotationSpec::from_uniform(r.random(), r.random(), r.random());
    let f = grid_of(&random_s2(&mut r, b));
    let bank = random_s2_bank(&mut r, 2, 1, b);
    let lhs = s2_correlate(&[rotate_s2(&f, &rot).unwrap()], &bank).unwrap();
    let rhs = rotate_so3(&s2_correlate(&[f], &bank).unwrap(), &rot).unwrap();
    assert!(rel_err(&lhs.data, &rhs.data) < 1e-9);

    let g = So3FeatureMap { channels: 1, bandwidth: b, data: so3_inverse(&random_so3(&mut r, b), b) };
    let bank3 = random_so3_bank(&mut r, 2, 1, b);
    let lhs = so3_correlate(&rotate_so3(&g, &rot).unwrap(), &bank3, None).unwrap();
    let rhs = rotate_so3(&so3_correlate(&g, &bank3, None).unwrap(), &rot).unwrap();
    assert!(rel_err(&lhs.data, &rhs.data) < 1e-9);
}

#[test]
fn correlation_outputs_keep_real_symmetry() {
    let mut r = rng(10);
    let b = 4;
    let f = random_s2(&mut r, b);
    let bank = random_s2_bank(&mut r, 3, 1, b);
    for out in s2_correlate_coeffs(&[f], &bank).unwrap() {
        assert!(out.real_symmetry_residual() < 1e-12);
    }
    let g = random_so3(&mut r, b);
    let bank3 = random_so3_bank(&mut r, 2, 1, b);
    for out in so3_correlate_coeffs(&[g], &bank3, b).unwrap() {
        assert!(out.real_symmetry_residual() < 1e-10);
    }
}

#[test]
fn identity_filter_returns_input() {
    let mut r = rng(11);
    let b = 3;
    let g = So3FeatureMap { channels: 2, bandwidth: b, data: [so3_inverse(&random_so3(&mut r, b), b), so3_inverse(&random_so3(&mut r, b), b)].concat() };
    let out = so3_correlate(&g, &So3FilterBank::identity(2, b), None).unwrap();
    assert!(rel_err(&out.data, &g.data) < 1e-10);
}

#[test]
fn constant_input_with_zonal_filter_gives_constant_output() {
    let b = 4;
    let f = S2Grid { bandwidth: b, data: vec![1.0; 4 * b * b] };
    let mut bank = S2FilterBank::<f64>::zeros(1, 1, b);
    for l in (0..b).step_by(2) {
        bank.coeffs[s2_index(l, 0)] = Complex::new(1.0, 0.0);
    }
    let out = s2_correlate(&[f], &bank).unwrap();
    let first = out.data[0];
    assert!(out.data.iter().all(|v| (v - first).abs() < 1e-12));
    assert!((first - (4.0 * PI).sqrt()).abs() < 1e-12);
}

#[test]
fn rotation_group_action() {
    let mut r = rng(12);
    let b = 6;
    let f = grid_of(&random_s2(&mut r, b));
    let same = rotate_s2(&f, &RotationSpec::identity()).unwrap();
    assert!(rel_err(&same.data, &f.data) < 1e-10);

    let r1 = RotationSpec::from_uniform(r.random(), r.random(), r.random());
    let r2 = RotationSpec::from_uniform(r.random(), r.random(), r.random());
    let seq = rotate_s2(&rotate_s2(&f, &r1).unwrap(), &r2).unwrap();
    let once = rotate_s2(&f, &r2.compose(&r1)).unwrap();
    assert!(rel_err(&seq.data, &once.data) < 1e-8);

    // grid-aligned yaw = azimuth index shift
    let n = 2 * b;
    for steps in [1usize, 5] {
        let yawed = rotate_s2(&f, &RotationSpec::yaw(steps as f64 * 2.0 * PI / n as f64)).unwrap();
        for a in 0..n {
            for k in 0..n {
                assert!((yawed.at((a + steps) % n, k) - f.at(a, k)).abs() < 1e-10);
            }
        }
    }
    // coefficient-domain rotation agrees with pointwise rotation of the function
    let c = random_s2(&mut r, 4);
    let rc = rotate_s2_coefficients(&c, &r1);
    let rinv = transpose(&r1.matrix());
    for &(beta, alpha) in &[(0.3, 0.1), (2.2, 4.0)] {
        let (pb, pa) = to_polar(apply(&rinv, direction(beta, alpha)));
        assert!((eval_s2(&rc, beta, alpha) - eval_s2(&c, pb, pa)).abs() < 1e-12);
    }
}

#[test]
fn so3_rotation_matches_pointwise_left_action() {
    let mut r = rng(13);
    let b = 3;
    let c = random_so3(&mut r, b);
    let g = So3FeatureMap { channels: 1, bandwidth: b, data: so3_inverse(&c, b) };
    let rot = RotationSpec::from_uniform(r.random(), r.random(), r.random());
    let out = rotate_so3(&g, &rot).unwrap();
    let rinv = transpose(&rot.matrix());
    let n = 2 * b;
    for i in [0usize, 17, 100, 215] {
        let (a, k, gg) = (i / (n * n), (i / n) % n, i % n);
        let q = euler_to_matrix(quadrature::alpha(b, a), quadrature::beta(b, k), quadrature::alpha(b, gg));
        assert!((out.data[i] - eval_so3(&c, &matmul(&rinv, &q))).abs() < 1e-10);
    }
}
