use std::ffi::CStr;
use std::ptr;

use tqdiff_ffi::*;

fn reduced(temperature: f64, omega0: f64) -> TqOscillatorParams {
    TqOscillatorParams {
        bath: tq_reduced_params(temperature),
        omega0,
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(tq_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(tq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn constants_and_closed_forms() {
    let bath = TqBathParams {
        m: 2.0,
        b: 0.5,
        temperature: 3.0,
        hbar: 0.7,
        kb: 1.0,
    };
    let mut c = TqDerivedConstants {
        diffusion: 0.0,
        lambda_t: 0.0,
        beta: 0.0,
        bohm_diffusivity: 0.0,
    };
    assert_eq!(unsafe { tq_derive(&bath, &mut c) }, TqStatus::Ok);
    assert!((c.diffusion - 6.0).abs() < 1e-14);
    let l2 = 0.49 / (4.0 * 2.0 * 3.0);
    assert!((c.lambda_t * c.lambda_t - l2).abs() < 1e-14);
    assert!((c.bohm_diffusivity - 0.49 / 4.0).abs() < 1e-14);

    let cold = tq_reduced_params(0.0);
    assert_eq!(unsafe { tq_derive(&cold, &mut c) }, TqStatus::Ok);
    assert!(c.lambda_t.is_infinite() && c.beta.is_infinite());

    // x - ln(1 + x) = 2 D t / lambda^2 with x = sigma^2 / lambda^2
    let mut s2 = 0.0;
    assert_eq!(unsafe { tq_front_sigma2(&bath, 0.01, &mut s2) }, TqStatus::Ok);
    let x = s2 / l2;
    assert!(((x - x.ln_1p()) - 2.0 * 6.0 * 0.01 / l2).abs() < 1e-9 * x);

    let p = reduced(0.4, 1.3);
    let beta = 1.0 / 0.4;
    let w = 1.3;
    let mut out = 0.0;
    assert_eq!(unsafe { tq_oscillator_sigma2_exact(&p, &mut out) }, TqStatus::Ok);
    let exact = coth(beta * w / 2.0) / (2.0 * w);
    assert!((out - exact).abs() < 1e-8 * exact);
    assert_eq!(
        unsafe { tq_oscillator_sigma2_closure(&p, &mut out) },
        TqStatus::Ok
    );
    let closure = (1.0 + (1.0 + (beta * w).powi(2)).sqrt()) / (2.0 * beta * w * w);
    assert!((out - closure).abs() < 1e-12 * closure);

    let zero = reduced(0.0, 1.0);
    assert_eq!(
        unsafe { tq_zero_t_oscillator_sigma2(&zero, 0.5, &mut out) },
        TqStatus::Ok
    );
    let expected = 0.5 * (1.0 - (-4.0f64 * 0.5).exp()).sqrt();
    assert!((out - expected).abs() < 1e-14);

    let mut k = 0.0;
    assert_eq!(unsafe { tq_effective_spring(&p, &mut k) }, TqStatus::Ok);
    assert!(k > 0.0 && k < w * w);
}

#[test]
fn moments_follow_the_front_law() {
    let p = reduced(1.0, 0.0);
    let times: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
    let mut out = vec![0.0; times.len()];
    let status = unsafe {
        tq_moments_integrate(
            TqMomentKind::FreeThermal,
            &p,
            0.0,
            times.as_ptr(),
            times.len(),
            out.as_mut_ptr(),
        )
    };
    assert_eq!(status, TqStatus::Ok, "{}", last_error());
    for (t, s2) in times.iter().zip(&out) {
        let mut front = 0.0;
        unsafe { tq_front_sigma2(&p.bath, *t, &mut front) };
        assert!((s2 - front).abs() <= 1e-7 * front, "t = {t}");
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut out = 0.0;
    assert_eq!(
        unsafe { tq_front_sigma2(ptr::null(), 1.0, &mut out) },
        TqStatus::NullPointer
    );
    assert_eq!(last_error(), "params is null");

    let mut bad = tq_reduced_params(1.0);
    bad.m = -1.0;
    assert_eq!(
        unsafe { tq_front_sigma2(&bad, 1.0, &mut out) },
        TqStatus::InvalidArgument
    );
    assert!(last_error().contains("m"), "{}", last_error());

    let free = reduced(1.0, 0.0);
    assert_eq!(
        unsafe { tq_oscillator_sigma2_exact(&free, &mut out) },
        TqStatus::InvalidArgument
    );

    let p = tq_reduced_params(1.0);
    assert_eq!(unsafe { tq_front_sigma2(&p, 1.0, &mut out) }, TqStatus::Ok);
    assert_eq!(last_error(), "");

    let xs: Vec<f64> = (0..256).map(|i| (i as f64 * 0.3).sin()).collect();
    let mut small = [0.0; 4];
    let status = unsafe { tq_acf(xs.as_ptr(), xs.len(), 0.1, 10, small.as_mut_ptr(), 4) };
    assert_eq!(status, TqStatus::BufferTooSmall);
}

#[test]
fn pde_handle_spreads_and_reports_leaks() {
    let spec = TqPdeSpec {
        model: TqPdeModel::FreeThermal,
        params: reduced(1.0, 0.0),
        n: 513,
        half_width: 16.0,
        center: 0.0,
        sigma2_0: 0.5,
        cfl: 0.0,
    };
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { tq_pde_new(&spec, &mut h) }, TqStatus::Ok);
    assert_eq!(unsafe { tq_pde_advance_to(h, 1.0) }, TqStatus::Ok);
    let (mut t, mut var, mut mass, mut n) = (0.0, 0.0, 0.0, 0usize);
    unsafe {
        tq_pde_time(h, &mut t);
        tq_pde_variance(h, &mut var);
        tq_pde_mass(h, &mut mass);
        tq_pde_len(h, &mut n);
    }
    assert_eq!(t, 1.0);
    assert_eq!(n, 513);
    assert!((mass - 1.0).abs() < 1e-10);
    assert!(var > 0.5 + 2.0 * 0.9);
    let mut x = vec![0.0; n];
    let mut density = vec![0.0; n];
    assert_eq!(
        unsafe { tq_pde_density(h, x.as_mut_ptr(), density.as_mut_ptr(), n) },
        TqStatus::Ok
    );
    assert_eq!((x[0], x[n - 1]), (-16.0, 16.0));
    assert!(density.iter().all(|v| *v >= 0.0));
    unsafe { tq_pde_free(h) };

    let tight = TqPdeSpec {
        n: 201,
        half_width: 5.0,
        ..spec
    };
    assert_eq!(unsafe { tq_pde_new(&tight, &mut h) }, TqStatus::Ok);
    assert_eq!(unsafe { tq_pde_advance_to(h, 5.0) }, TqStatus::BoundaryLeak);
    assert!(last_error().contains("boundary"));
    unsafe { tq_pde_free(h) };
    unsafe { tq_pde_free(ptr::null_mut()) };
}

#[test]
fn split_sim_matches_one_run() {
    let spec = TqSimSpec {
        params: reduced(1.0, 1.0),
        n_traj: 500,
        dt: 0.01,
        seed: 12,
        dynamics: TqDynamics::Underdamped,
        force: TqForce::External,
        sigma2_0: 0.3,
    };
    let run = |chunks: &[f64]| -> (Vec<f64>, f64) {
        let mut h = ptr::null_mut();
        assert_eq!(unsafe { tq_sim_new(&spec, &mut h) }, TqStatus::Ok);
        for d in chunks {
            assert_eq!(unsafe { tq_sim_advance(h, *d) }, TqStatus::Ok);
        }
        let mut xs = vec![0.0; spec.n_traj];
        let mut t = 0.0;
        unsafe {
            assert_eq!(
                tq_sim_positions(h, xs.as_mut_ptr(), xs.len()),
                TqStatus::Ok
            );
            tq_sim_time(h, &mut t);
            tq_sim_free(h);
        }
        (xs, t)
    };
    let (whole, t1) = run(&[2.0]);
    let (split, t2) = run(&[0.5, 1.0, 0.5]);
    assert!((t1 - 2.0).abs() < 1e-12 && (t2 - 2.0).abs() < 1e-12);
    assert_eq!(whole, split);

    let mf = TqSimSpec {
        n_traj: 1,
        force: TqForce::MeanfieldBohm,
        ..spec
    };
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { tq_sim_new(&mf, &mut h) }, TqStatus::InvalidArgument);
    assert!(h.is_null());
    assert_eq!(last_error(), "configuration error: mean-field mode requires N ≥ 2");
}

#[test]
fn sim_stats_relax_to_equipartition() {
    let kt = 0.7;
    let spec = TqSimSpec {
        params: reduced(kt, 1.0),
        n_traj: 20_000,
        dt: 0.01,
        seed: 3,
        dynamics: TqDynamics::Overdamped,
        force: TqForce::External,
        sigma2_0: 0.0,
    };
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { tq_sim_new(&spec, &mut h) }, TqStatus::Ok);
    assert_eq!(unsafe { tq_sim_advance(h, 10.0) }, TqStatus::Ok);
    let mut s = TqSampleStats {
        mean: 0.0,
        var: 0.0,
        var_stderr: 0.0,
    };
    unsafe {
        tq_sim_stats(h, &mut s);
        tq_sim_free(h);
    }
    // kT / (m omega^2)
    assert!((s.var - kt).abs() <= 4.0 * s.var_stderr, "{s:?}");
}

#[test]
fn spectral_buffers() {
    let dt = 0.05;
    let xs: Vec<f64> = (0..4096).map(|i| (3.0 * i as f64 * dt).cos()).collect();
    let mut c = vec![0.0; 11];
    assert_eq!(
        unsafe { tq_acf(xs.as_ptr(), xs.len(), dt, 10, c.as_mut_ptr(), c.len()) },
        TqStatus::Ok
    );
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!((c[0] - var).abs() < 1e-12);

    let cap = 257;
    let (mut w, mut s) = (vec![0.0; cap], vec![0.0; cap]);
    let mut written = 0;
    let status = unsafe {
        tq_psd(
            xs.as_ptr(),
            xs.len(),
            dt,
            512,
            0.5,
            w.as_mut_ptr(),
            s.as_mut_ptr(),
            cap,
            &mut written,
        )
    };
    assert_eq!(status, TqStatus::Ok, "{}", last_error());
    assert_eq!(written, 257);
    let k = (0..written).max_by(|a, b| s[*a].total_cmp(&s[*b])).unwrap();
    assert!((w[k] - 3.0).abs() <= w[1]);
}
