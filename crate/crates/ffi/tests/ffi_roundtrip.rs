//! Exercises the C surface end to end: handles in, buffers out, with the
//! worked jump example as the reference workload.

use std::ffi::{CStr, CString};

use orthant_reflect_ffi::*;

fn jump_values(n: u32) -> Vec<f64> {
    let steps = 2 * n as usize;
    let mut values = Vec::with_capacity((steps + 1) * 2);
    for g in 0..=steps {
        let v = if g < n as usize { 0.0 } else { -1.0 };
        values.push(v);
        values.push(v);
    }
    values
}

#[test]
fn jump_example_through_the_c_surface() {
    unsafe {
        let text = CString::new("2\n0 0.5\n0.5 0\n").unwrap();
        let q = or_matrix_parse(text.as_ptr());
        assert!(!q.is_null());
        assert_eq!(or_matrix_dim(q), 2);
        assert_eq!(or_matrix_col_norm(q), 0.5);

        let n = 16u32;
        let values = jump_values(n);
        let y = or_path_new(n, 2.0, 2, values.as_ptr(), values.len());
        assert!(!y.is_null());
        assert_eq!(or_path_points(y), 33);
        assert_eq!(or_path_dim(y), 2);
        assert_eq!(or_path_time(y, 16), 1.0);

        let sol = or_solve(q, y, OrSolver::Fast);
        assert!(!sol.is_null());

        let mut gap = f64::NAN;
        assert_eq!(
            or_solution_fixed_point_gap(q, y, sol, &mut gap),
            OrStatus::Ok
        );
        assert!(gap <= 1e-12, "fixed point gap {gap}");

        let x = or_solution_x(sol);
        let k = or_solution_k(sol);
        assert!(!x.is_null() && !k.is_null());
        let xs = std::slice::from_raw_parts(or_path_values(x), 33 * 2);
        let ks = std::slice::from_raw_parts(or_path_values(k), 33 * 2);
        for i in 0..=(n as usize) {
            let g = n as usize + i;
            let expected_x = -0.5_f64.powi(i as i32 + 1);
            let expected_k = 2.0 - 0.5_f64.powi(i as i32);
            for j in 0..2 {
                assert!(
                    (xs[g * 2 + j] - expected_x).abs() <= 1e-14,
                    "x at {g}: {} vs {expected_x}",
                    xs[g * 2 + j]
                );
                assert!(
                    (ks[g * 2 + j] - expected_k).abs() <= 1e-14,
                    "k at {g}: {} vs {expected_k}",
                    ks[g * 2 + j]
                );
            }
        }

        or_path_free(x);
        or_path_free(k);
        or_solution_free(sol);
        or_path_free(y);
        or_matrix_free(q);
    }
}

#[test]
fn projection_through_the_c_surface() {
    unsafe {
        let q = or_matrix_new(2, [0.0, 0.5, 0.5, 0.0].as_ptr());
        assert!(!q.is_null());
        let z = [-1.0, -1.0];
        let mut pi = [f64::NAN; 2];
        let mut r_bar = [f64::NAN; 2];
        assert_eq!(
            or_project(q, z.as_ptr(), 2, 0.0, pi.as_mut_ptr(), r_bar.as_mut_ptr()),
            OrStatus::Ok
        );
        for j in 0..2 {
            assert!(pi[j].abs() <= 1e-12, "pi {pi:?}");
            assert!((r_bar[j] - 2.0).abs() <= 1e-12, "r_bar {r_bar:?}");
        }
        assert_eq!(
            or_project(
                q,
                z.as_ptr(),
                3,
                0.0,
                pi.as_mut_ptr(),
                r_bar.as_mut_ptr()
            ),
            OrStatus::InvalidArgument
        );
        assert_eq!(
            or_project(
                std::ptr::null(),
                z.as_ptr(),
                2,
                0.0,
                pi.as_mut_ptr(),
                r_bar.as_mut_ptr()
            ),
            OrStatus::NullPointer
        );
        or_matrix_free(q);
    }
}

#[test]
fn failures_leave_a_readable_message() {
    unsafe {
        let sol = or_solve(std::ptr::null(), std::ptr::null(), OrSolver::Fast);
        assert!(sol.is_null());
        let msg = CStr::from_ptr(or_last_error_message()).to_str().unwrap();
        assert!(msg.contains("or_solve"), "{msg}");

        let bad_len = or_path_new(4, 1.0, 2, [0.0; 4].as_ptr(), 4);
        assert!(bad_len.is_null());
        let msg = CStr::from_ptr(or_last_error_message()).to_str().unwrap();
        assert!(!msg.is_empty());
    }
}

#[test]
fn wiener_paths_are_seed_deterministic() {
    unsafe {
        let a = or_path_wiener(9, 64, 2, 1.0);
        let b = or_path_wiener(9, 64, 2, 1.0);
        let c = or_path_wiener(10, 64, 2, 1.0);
        assert!(!a.is_null() && !b.is_null() && !c.is_null());
        let len = or_path_points(a) * or_path_dim(a);
        let va = std::slice::from_raw_parts(or_path_values(a), len);
        let vb = std::slice::from_raw_parts(or_path_values(b), len);
        let vc = std::slice::from_raw_parts(or_path_values(c), len);
        assert_eq!(va, vb);
        assert_ne!(va, vc);
        or_path_free(a);
        or_path_free(b);
        or_path_free(c);
    }
}
