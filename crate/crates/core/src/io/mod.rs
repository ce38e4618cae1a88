//! Artifacts, configuration and dataset export.
//!
//! Every pipeline stage has an artifact form: a [`Container`] whose
//! manifest records the stage, the crate version, the experiment
//! configuration and the digests of its inputs. [`regenerate`] rebuilds
//! any artifact from its manifest alone.

pub mod config;
pub mod container;
pub mod dataset;

pub use config::{ExperimentConfig, TrajectorySpec};
pub use container::{ArrayData, ArrayHeader, Container, DType};
pub use dataset::{export_dataset, SplitRatios};

use ndarray::{s, Array2, Array3, Axis, Ix2, Ix3};
use serde_json::{json, Value};

use crate::acquisition::{grid_recon, KSpace, MrfSeries};
use crate::dictionary::{match_image, Dictionary, MatchMaps, ParamGrid};
use crate::epg::FispMrf;
use crate::error::{ensure, Error, Result};
use crate::metrics::{evaluate_contrasts, MetricReport};
use crate::phantom::PhantomSlice;
use crate::synthesis::{synthesize_from_maps, ContrastSet, Provenance};

pub mod role {
    pub const PHANTOM: &str = "phantom";
    pub const DICTIONARY: &str = "dictionary";
    pub const KSPACE: &str = "kspace";
    pub const SERIES: &str = "series";
    pub const MAPS: &str = "maps";
    pub const CONTRASTS: &str = "contrasts";
    pub const TRUTH: &str = "truth";
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn manifest(stage: &str, config: Option<&ExperimentConfig>, inputs: &[(&str, &Container)]) -> Result<Value> {
    let mut m = json!({ "stage": stage, "version": VERSION });
    if let Some(cfg) = config {
        m["config"] = serde_json::to_value(cfg)?;
    }
    if !inputs.is_empty() {
        let map: serde_json::Map<String, Value> =
            inputs.iter().map(|(k, c)| (k.to_string(), Value::String(c.header.digest.clone()))).collect();
        m["inputs"] = Value::Object(map);
    }
    Ok(m)
}

fn config_of(c: &Container) -> Result<ExperimentConfig> {
    c.manifest_field("config")
}

fn real3(c: &Container, planes: usize) -> Result<Array3<f64>> {
    let a = c.data.to_real()?.into_dimensionality::<Ix3>().map_err(|e| Error::Format(e.to_string()))?;
    ensure(a.len_of(Axis(0)) == planes, || format!("expected {planes} planes, found {}", a.len_of(Axis(0))))
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(a)
}

fn stack(planes: &[&Array2<f64>]) -> Array3<f64> {
    let (h, w) = planes[0].dim();
    let mut out = Array3::zeros((planes.len(), h, w));
    for (i, p) in planes.iter().enumerate() {
        out.slice_mut(s![i, .., ..]).assign(p);
    }
    out
}

/// `[t1, t2, pd, b0, label]` planes.
pub fn phantom_artifact(cfg: &ExperimentConfig) -> Result<Container> {
    let p = cfg.phantom_slice()?;
    let labels = p.labels.mapv(f64::from);
    let data = stack(&[&p.t1, &p.t2, &p.pd, &p.b0, &labels]);
    Ok(Container::new(
        ArrayData::from_real(&data),
        role::PHANTOM,
        "ms,ms,a.u.,Hz,label",
        manifest(role::PHANTOM, Some(cfg), &[])?,
    ))
}

pub fn read_phantom(c: &Container) -> Result<PhantomSlice> {
    c.expect_role(role::PHANTOM)?;
    let a = real3(c, 5)?;
    let plane = |i: usize| a.index_axis(Axis(0), i).to_owned();
    Ok(PhantomSlice { t1: plane(0), t2: plane(1), pd: plane(2), b0: plane(3), labels: plane(4).mapv(|v| v as u8) })
}

/// Atoms as a complex `[n_atoms, t]` array. The payload digest equals the
/// dictionary's manifest hash.
pub fn dictionary_artifact(dict: &Dictionary) -> Result<Container> {
    let atoms = Array2::from_shape_vec((dict.n_atoms(), dict.atom_len()), dict.atoms())
        .map_err(|e| Error::Internal(e.to_string()))?;
    let mut m = manifest(role::DICTIONARY, None, &[])?;
    m["grid"] = serde_json::to_value(dict.grid())?;
    m["sequence"] = serde_json::to_value(dict.spec())?;
    m["atom_norms"] = serde_json::to_value(dict.atom_norms())?;
    Ok(Container::new(ArrayData::from_complex(&atoms), role::DICTIONARY, "a.u.", m))
}

pub fn read_dictionary(c: &Container) -> Result<Dictionary> {
    c.expect_role(role::DICTIONARY)?;
    let grid: ParamGrid = c.manifest_field("grid")?;
    let spec: FispMrf = c.manifest_field("sequence")?;
    let atoms = c.data.to_complex()?;
    let norms: Vec<f64> = c.manifest_field("atom_norms")?;
    Dictionary::from_atoms(atoms.as_slice().expect("standard layout"), norms, grid, spec)
}

/// Samples `[n_tr, samples_per_tr]`; the trajectory is rebuilt from the
/// configuration.
pub fn kspace_artifact(cfg: &ExperimentConfig) -> Result<Container> {
    let k = cfg.acquire()?;
    Ok(Container::new(
        ArrayData::from_complex(&k.samples),
        role::KSPACE,
        "a.u.",
        manifest(role::KSPACE, Some(cfg), &[])?,
    ))
}

pub fn read_kspace(c: &Container) -> Result<KSpace> {
    c.expect_role(role::KSPACE)?;
    let cfg = config_of(c)?;
    let samples = c.data.to_complex()?.into_dimensionality::<Ix2>().map_err(|e| Error::Format(e.to_string()))?;
    Ok(KSpace { samples, trajectory: cfg.build_trajectory()? })
}

/// Gridded, 95th-percentile normalized series `[t, h, w]`.
pub fn recon_artifact(kspace: &Container) -> Result<Container> {
    let cfg = config_of(kspace)?;
    let (series, p) = grid_recon(&read_kspace(kspace)?, &cfg.sequence)?.normalize_95th()?;
    let mut m = manifest(role::SERIES, Some(&cfg), &[("kspace", kspace)])?;
    m["normalization"] = json!(p);
    Ok(Container::new(ArrayData::from_complex(&series.frames), role::SERIES, "a.u.", m))
}

pub fn read_series(c: &Container) -> Result<MrfSeries> {
    c.expect_role(role::SERIES)?;
    let cfg = config_of(c)?;
    let frames = c.data.to_complex()?.into_dimensionality::<Ix3>().map_err(|e| Error::Format(e.to_string()))?;
    let mut s = MrfSeries::new(frames, cfg.sequence);
    s.normalization = c.manifest_field("normalization").unwrap_or(1.0);
    s.validate()?;
    Ok(s)
}

/// `[t1, t2, pd, similarity]` planes. The recorded configuration takes
/// the dictionary's grid, so the maps regenerate from the manifest.
pub fn match_artifact(series: &Container, dict: &Container) -> Result<(Container, MatchMaps)> {
    let s = read_series(series)?;
    let d = read_dictionary(dict)?;
    ensure(d.spec() == &s.spec, || "dictionary and series were simulated with different sequences".into())?;
    let maps = match_image(&s, &d)?;
    let mut cfg = config_of(series)?;
    cfg.grid = d.grid().clone();
    let data = stack(&[&maps.t1, &maps.t2, &maps.pd, &maps.similarity]);
    let m = manifest(role::MAPS, Some(&cfg), &[("series", series), ("dictionary", dict)])?;
    Ok((Container::new(ArrayData::from_real(&data), role::MAPS, "ms,ms,a.u.,1", m), maps))
}

/// `(t1, t2, pd, similarity)`
pub fn read_maps(c: &Container) -> Result<[Array2<f64>; 4]> {
    c.expect_role(role::MAPS)?;
    let a = real3(c, 4)?;
    Ok(std::array::from_fn(|i| a.index_axis(Axis(0), i).to_owned()))
}

fn contrasts_container(set: &ContrastSet, stage: &str, m: Value) -> Container {
    let data = stack(&[&set.t1w, &set.t2w, &set.flair]);
    let mut m = m;
    m["provenance"] = serde_json::to_value(set.provenance).expect("enum serializes");
    Container::new(ArrayData::from_real(&data), stage, "a.u.", m)
}

/// `[t1w, t2w, flair]` simulated from matched maps.
pub fn synth_artifact(maps: &Container) -> Result<(Container, ContrastSet)> {
    let cfg = config_of(maps)?;
    let [t1, t2, pd, _] = read_maps(maps)?;
    let set = synthesize_from_maps(&t1, &t2, &pd, &cfg.contrasts)?;
    let m = manifest(role::CONTRASTS, Some(&cfg), &[("maps", maps)])?;
    Ok((contrasts_container(&set, role::CONTRASTS, m), set))
}

/// Ground-truth `[t1w, t2w, flair]` simulated from the phantom maps.
pub fn truth_artifact(cfg: &ExperimentConfig) -> Result<Container> {
    let set = cfg.ground_truth()?;
    Ok(contrasts_container(&set, role::TRUTH, manifest(role::TRUTH, Some(cfg), &[])?))
}

pub fn read_contrasts(c: &Container) -> Result<ContrastSet> {
    ensure(c.header.role == role::CONTRASTS || c.header.role == role::TRUTH, || {
        format!("expected contrasts, found a '{}' container", c.header.role)
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    let cfg = config_of(c)?;
    let a = real3(c, 3)?;
    let plane = |i: usize| a.index_axis(Axis(0), i).to_owned();
    let provenance: Provenance = c.manifest_field("provenance")?;
    Ok(ContrastSet { t1w: plane(0), t2w: plane(1), flair: plane(2), specs: cfg.contrasts, provenance })
}

/// Scores predicted contrasts against the truth, each image normalized
/// by its own 95th percentile. Without an explicit truth artifact the
/// truth is simulated from the prediction's configuration.
pub fn evaluate_artifact(pred: &Container, truth: Option<&Container>) -> Result<MetricReport> {
    let p = read_contrasts(pred)?;
    let t = match truth {
        Some(c) => read_contrasts(c)?,
        None => config_of(pred)?.ground_truth()?,
    };
    ensure(p.dim() == t.dim(), || format!("prediction is {:?}, truth is {:?}", p.dim(), t.dim()))?;
    let method = match p.provenance {
        Provenance::Simulation => "simulation",
        Provenance::GroundTruth => "truth",
        Provenance::Network => "network",
    };
    Ok(MetricReport::new(method, vec![evaluate_contrasts(&p, &t, true)?]))
}

/// Rebuilds an artifact from the configuration in its manifest, replaying
/// the same chain of stages (and single-precision storage) that made it.
pub fn regenerate(c: &Container) -> Result<Container> {
    match c.header.role.as_str() {
        role::DICTIONARY => {
            let grid: ParamGrid = c.manifest_field("grid")?;
            let spec: FispMrf = c.manifest_field("sequence")?;
            dictionary_artifact(&crate::dictionary::build_dictionary(&grid, &spec)?)
        }
        role::TRUTH => truth_artifact(&config_of(c)?),
        other => stage_from_config(other, &config_of(c)?),
    }
}

/// Produces the artifact of `stage` from scratch.
pub fn stage_from_config(stage: &str, cfg: &ExperimentConfig) -> Result<Container> {
    match stage {
        role::PHANTOM => phantom_artifact(cfg),
        role::DICTIONARY => dictionary_artifact(&cfg.dictionary()?),
        role::KSPACE => kspace_artifact(cfg),
        role::SERIES => recon_artifact(&kspace_artifact(cfg)?),
        role::MAPS => {
            let series = stage_from_config(role::SERIES, cfg)?;
            Ok(match_artifact(&series, &dictionary_artifact(&cfg.dictionary()?)?)?.0)
        }
        role::CONTRASTS => Ok(synth_artifact(&stage_from_config(role::MAPS, cfg)?)?.0),
        role::TRUTH => truth_artifact(cfg),
        other => Err(Error::Format(format!("unknown artifact role '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::ParamGrid;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk(5);
        cfg.phantom.height = 32;
        cfg.phantom.width = 32;
        cfg.sequence = FispMrf::new(40, 0);
        cfg.grid = ParamGrid::log_spaced((4.0, 4000.0, 16), (2.0, 2000.0, 14));
        cfg.trajectory = TrajectorySpec::spiral(400, 4.0);
        cfg
    }

    #[test]
    fn phantom_and_dictionary_round_trip() {
        let cfg = small();
        let c = phantom_artifact(&cfg).unwrap();
        let back = Container::from_bytes(&c.to_bytes().unwrap()).unwrap();
        let p = read_phantom(&back).unwrap();
        assert_eq!(p.labels, cfg.phantom_slice().unwrap().labels);

        let d = cfg.dictionary().unwrap();
        let dc = dictionary_artifact(&d).unwrap();
        assert_eq!(dc.header.digest, format!("sha256:{}", d.manifest_hash()));
        let d2 = read_dictionary(&dc).unwrap();
        assert_eq!(d2.manifest_hash(), d.manifest_hash());
        assert_eq!(d2.n_atoms(), d.n_atoms());
        assert!(read_dictionary(&c).is_err());
    }

    #[test]
    fn every_stage_regenerates_from_its_manifest() {
        let cfg = small();
        for stage in
            [role::PHANTOM, role::DICTIONARY, role::KSPACE, role::SERIES, role::MAPS, role::CONTRASTS, role::TRUTH]
        {
            let a = stage_from_config(stage, &cfg).unwrap();
            let stored = Container::from_bytes(&a.to_bytes().unwrap()).unwrap();
            let b = regenerate(&stored).unwrap();
            assert_eq!(a.header.digest, b.header.digest, "{stage}");
            assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap(), "{stage}");
        }
        assert!(stage_from_config("nonsense", &cfg).is_err());
    }

    #[test]
    fn chained_stages_record_their_inputs() {
        let cfg = small();
        let k = kspace_artifact(&cfg).unwrap();
        let s = recon_artifact(&k).unwrap();
        assert_eq!(s.header.manifest["inputs"]["kspace"], json!(k.header.digest));
        let d = dictionary_artifact(&cfg.dictionary().unwrap()).unwrap();
        let (m, maps) = match_artifact(&s, &d).unwrap();
        assert_eq!(m.header.shape, vec![4, 32, 32]);
        assert_eq!(maps.dim(), (32, 32));
        let (c, _) = synth_artifact(&m).unwrap();
        let report = evaluate_artifact(&c, None).unwrap();
        assert_eq!(report.samples.len(), 1);
        assert!(recon_artifact(&d).is_err());
    }
}
