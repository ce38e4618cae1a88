use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use mrfcs::epg::{simulate_fingerprint, FispMrf, TissueParams};
use mrfcs_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mrfcs_last_error()) }.to_string_lossy().into_owned()
}

fn sequence(n_tr: usize) -> *mut MrfcsSequence {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { mrfcs_sequence_new(n_tr, 0, &mut s) }, MrfcsStatus::Ok);
    s
}

#[test]
fn fingerprint_matches_the_library() {
    let seq = sequence(50);
    let t = MrfcsTissue { t1_ms: 800.0, t2_ms: 70.0, pd: 0.9 };
    let (mut re, mut im) = (vec![0.0; 50], vec![0.0; 50]);
    let st = unsafe { mrfcs_simulate_fingerprint(seq, &t, re.as_mut_ptr(), im.as_mut_ptr(), 50) };
    assert_eq!(st, MrfcsStatus::Ok);
    let expected = simulate_fingerprint(&TissueParams::new(800.0, 70.0, 0.9).unwrap(), &FispMrf::new(50, 0)).unwrap();
    for (i, c) in expected.samples.iter().enumerate() {
        assert_eq!((re[i], im[i]), (c.re, c.im));
    }

    let st = unsafe { mrfcs_simulate_fingerprint(seq, &t, re.as_mut_ptr(), im.as_mut_ptr(), 49) };
    assert_eq!(st, MrfcsStatus::InvalidArgument);
    assert!(last_error().contains("49"));
    let bad = MrfcsTissue { t1_ms: -1.0, ..t };
    assert_eq!(
        unsafe { mrfcs_simulate_fingerprint(seq, &bad, re.as_mut_ptr(), im.as_mut_ptr(), 50) },
        MrfcsStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { mrfcs_simulate_fingerprint(ptr::null(), &t, re.as_mut_ptr(), im.as_mut_ptr(), 50) },
        MrfcsStatus::NullPointer
    );
    unsafe { mrfcs_sequence_free(seq) };
}

#[test]
fn contrasts_are_positive() {
    let t = MrfcsTissue { t1_ms: 950.0, t2_ms: 100.0, pd: 0.85 };
    let mut out = [0.0; 3];
    assert_eq!(unsafe { mrfcs_simulate_contrasts(&t, out.as_mut_ptr()) }, MrfcsStatus::Ok);
    assert!(out.iter().all(|&v| v > 0.0));
    assert!(last_error().is_empty());
}

#[test]
fn dictionary_build_match_save_load() {
    let seq = sequence(60);
    let t1 = [300.0, 600.0, 900.0, 1200.0];
    let t2 = [40.0, 80.0, 160.0];
    let mut d = ptr::null_mut();
    let st = unsafe { mrfcs_dictionary_build(t1.as_ptr(), 4, t2.as_ptr(), 3, seq, &mut d) };
    assert_eq!(st, MrfcsStatus::Ok);
    let n = unsafe { mrfcs_dictionary_n_atoms(d) };
    assert_eq!(n, 12);
    assert_eq!(unsafe { mrfcs_dictionary_atom_len(d) }, 60);

    // a tissue on the grid, scaled: exact match, pd is the scale times its norm
    let t = MrfcsTissue { t1_ms: 600.0, t2_ms: 80.0, pd: 1.0 };
    let (mut re, mut im) = (vec![0.0; 60], vec![0.0; 60]);
    unsafe { mrfcs_simulate_fingerprint(seq, &t, re.as_mut_ptr(), im.as_mut_ptr(), 60) };
    let norm: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
    let mut m = MrfcsMatch { t1_ms: 0.0, t2_ms: 0.0, pd: 0.0, similarity: 0.0, atom_index: 0 };
    assert_eq!(unsafe { mrfcs_dictionary_match(d, re.as_ptr(), im.as_ptr(), 60, &mut m) }, MrfcsStatus::Ok);
    assert_eq!((m.t1_ms, m.t2_ms), (600.0, 80.0));
    assert!((m.similarity - 1.0).abs() < 1e-12);
    assert!((m.pd - norm).abs() < 1e-12 * norm);

    let zeros = vec![0.0; 60];
    unsafe { mrfcs_dictionary_match(d, zeros.as_ptr(), zeros.as_ptr(), 60, &mut m) };
    assert_eq!(m.atom_index, -1);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("d.bin").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mrfcs_dictionary_save(d, path.as_ptr()) }, MrfcsStatus::Ok);
    let mut d2 = ptr::null_mut();
    assert_eq!(unsafe { mrfcs_dictionary_load(path.as_ptr(), &mut d2) }, MrfcsStatus::Ok);
    let (mut h1, mut h2) = ([0 as std::os::raw::c_char; 65], [0 as std::os::raw::c_char; 65]);
    unsafe {
        assert_eq!(mrfcs_dictionary_hash(d, h1.as_mut_ptr(), 65), MrfcsStatus::Ok);
        assert_eq!(mrfcs_dictionary_hash(d2, h2.as_mut_ptr(), 65), MrfcsStatus::Ok);
        assert_eq!(mrfcs_dictionary_hash(d, h1.as_mut_ptr(), 10), MrfcsStatus::InvalidArgument);
    }
    assert_eq!(h1, h2);

    let missing = CString::new(dir.path().join("nope.bin").to_str().unwrap()).unwrap();
    let mut d3 = ptr::null_mut();
    assert_eq!(unsafe { mrfcs_dictionary_load(missing.as_ptr(), &mut d3) }, MrfcsStatus::Io);
    assert!(d3.is_null());

    let empty = [50.0];
    let big = [100.0];
    assert_eq!(
        unsafe { mrfcs_dictionary_build(empty.as_ptr(), 1, big.as_ptr(), 1, seq, &mut d3) },
        MrfcsStatus::InvalidArgument
    );
    let preset = CString::new("nonsense").unwrap();
    assert_eq!(unsafe { mrfcs_dictionary_build_preset(preset.as_ptr(), seq, &mut d3) }, MrfcsStatus::InvalidArgument);

    unsafe {
        mrfcs_dictionary_free(d);
        mrfcs_dictionary_free(d2);
        mrfcs_dictionary_free(ptr::null_mut());
        mrfcs_sequence_free(seq);
    }
}

#[test]
fn phantom_maps_and_metrics() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { mrfcs_phantom_create(48, 3, &mut p) }, MrfcsStatus::Ok);
    let (mut h, mut w) = (0, 0);
    assert_eq!(unsafe { mrfcs_phantom_dims(p, &mut h, &mut w) }, MrfcsStatus::Ok);
    assert_eq!((h, w), (48, 48));
    let n = h * w;
    let mut t1 = vec![0.0; n];
    let mut labels = vec![0u8; n];
    let st = unsafe {
        mrfcs_phantom_copy_maps(
            p,
            t1.as_mut_ptr(),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            labels.as_mut_ptr(),
            n,
        )
    };
    assert_eq!(st, MrfcsStatus::Ok);
    assert!(labels.iter().zip(&t1).all(|(&l, &t)| (l == 0) == (t == 0.0)));
    assert_eq!(
        unsafe {
            mrfcs_phantom_copy_maps(
                p,
                t1.as_mut_ptr(),
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut(),
                3,
            )
        },
        MrfcsStatus::InvalidArgument
    );
    let mut small = ptr::null_mut();
    assert_eq!(unsafe { mrfcs_phantom_create(8, 0, &mut small) }, MrfcsStatus::InvalidArgument);

    let mut v = 0.0;
    unsafe {
        assert_eq!(mrfcs_ssim(t1.as_ptr(), t1.as_ptr(), h, w, &mut v), MrfcsStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(mrfcs_nrmse(t1.as_ptr(), t1.as_ptr(), h, w, &mut v), MrfcsStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(mrfcs_psnr(t1.as_ptr(), t1.as_ptr(), h, w, &mut v), MrfcsStatus::Ok);
        assert!(v.is_infinite());
        let zero = vec![0.0; n];
        assert_eq!(mrfcs_nrmse(t1.as_ptr(), zero.as_ptr(), h, w, &mut v), MrfcsStatus::InvalidArgument);
        assert_eq!(mrfcs_nrmse(ptr::null(), zero.as_ptr(), h, w, &mut v), MrfcsStatus::NullPointer);
        mrfcs_phantom_free(p);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(mrfcs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mrfcs.h");
    let text = std::fs::read_to_string(&header).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    for line in src.lines().filter(|l| l.contains("extern \"C\" fn ")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
    // syntax-check the header with a C compiler when one is available
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("t.c");
    std::fs::write(
        &c,
        "#include \"mrfcs.h\"\nint main(void) { MrfcsTissue t = {1, 1, 1}; (void)t; return MRFCS_STATUS_OK; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&c)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler found; header syntax check skipped"),
    }
}
