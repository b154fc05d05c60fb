//! Run-spec ingestion, JSON persistence of reports and factorisation trees,
//! and the re-verification path used by the command-line surface.
//!
//! Exactness discipline: every number that must survive a round trip exactly
//! travels as a string ("p/q" rationals, ball midpoints/radii); floating
//! point appears only in measured summaries.  Parsing is strict — unknown
//! fields are rejected with the serde path in the error.

use crate::factor::{
    ConstantsConfig, Factorisation, FactorisationTree, Leaf, ObstructionRecord, SplitData,
    TreeNode, TreeParams, VerificationReport,
};
use crate::group::{CustomGroupSpec, FilteredGroup, GroupElement, GroupRef};
use crate::polyseq::PolySequence;
use crate::scalar::{named_constant, parse_exact, Rat, Scalar, DEFAULT_PRECISION_BITS};
use crate::smooth::SmoothBase;
use crate::subgroup::Chart;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("spec error: {0}")]
    Schema(String),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Group(#[from] crate::group::GroupError),
    #[error(transparent)]
    Seq(#[from] crate::polyseq::SeqError),
    #[error(transparent)]
    Chart(#[from] crate::subgroup::ChartError),
    #[error(transparent)]
    Factor(#[from] crate::factor::FactorError),
    #[error("io error: {0}")]
    File(#[from] std::io::Error),
}

impl IoError {
    /// CLI failure class: 2 = spec, 3 = invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            IoError::Schema(_) | IoError::Json(_) | IoError::File(_) => 2,
            _ => 3,
        }
    }
}

/// Working precision for named constants, overridable through the
/// NILFACTOR_PRECISION_BITS environment variable.
pub fn precision_bits() -> u32 {
    std::env::var("NILFACTOR_PRECISION_BITS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&b| (32..=16384).contains(&b))
        .unwrap_or(DEFAULT_PRECISION_BITS)
}

/// Parse a coefficient literal: a named constant ("phi", "sqrt2", "e")
/// evaluated at the working precision, or an exact rational/decimal string.
pub fn parse_scalar_literal(s: &str, bits: u32) -> Result<Scalar, IoError> {
    let t = s.trim();
    if let Some(c) = named_constant(t, bits) {
        return Ok(c);
    }
    if let Some(r) = parse_exact(t) {
        return Ok(Scalar::from_rat(r));
    }
    Err(IoError::Schema(format!(
        "coefficient literal {t:?} is neither a named constant (phi, sqrt2, e) nor an exact rational/decimal"
    )))
}

fn default_b() -> u32 {
    2
}
fn default_e() -> u32 {
    2
}
fn default_r() -> u64 {
    8
}
fn default_q0() -> u64 {
    2
}
fn default_base() -> SmoothBase {
    SmoothBase::Fixed(3)
}
fn default_true() -> bool {
    true
}

/// A parsed, validated run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Group preset id ("torus:m", "heisenberg", "product:…"); exactly one
    /// of `group`/`custom_group` is required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_group: Option<CustomGroupSpec>,
    /// Filtration degree d; defaults to the Taylor length minus one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    /// Taylor coefficients: coeffs[j] lists the coordinates of g_j.
    pub coeffs: Vec<Vec<String>>,
    #[serde(rename = "N")]
    pub n: u64,
    /// Range to partition; defaults to N.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(rename = "B", default = "default_b")]
    pub b: u32,
    #[serde(rename = "E", default = "default_e")]
    pub e: u32,
    #[serde(rename = "R", default = "default_r")]
    pub r: u64,
    #[serde(rename = "Q0", default = "default_q0")]
    pub q0: u64,
    #[serde(default = "default_base")]
    pub base: SmoothBase,
    #[serde(default)]
    pub config: ConstantsConfig,
    #[serde(default)]
    pub seed: u64,
    /// Certified mode re-runs deterministic sweeps; sampled verdicts are
    /// flagged in reports either way.
    #[serde(default = "default_true")]
    pub certified: bool,
    /// Optional measurement overrides for the equidist/factorise commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_len: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_exp: Option<f64>,
    /// Sanity floor exponent for T (default: T ≥ N^0.9).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min_exponent: Option<f64>,
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl RunSpec {
    pub fn parse(text: &str) -> Result<RunSpec, IoError> {
        let spec: RunSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        match (&self.group, &self.custom_group) {
            (Some(_), Some(_)) => {
                return Err(IoError::Schema(
                    "group: both a preset id and a custom block were given; pick one".into(),
                ))
            }
            (None, None) => {
                return Err(IoError::Schema(
                    "group: a preset id or a custom block is required".into(),
                ))
            }
            _ => {}
        }
        if self.coeffs.is_empty() {
            return Err(IoError::Schema("coeffs: at least g_0 is required".into()));
        }
        if self.n < 2 {
            return Err(IoError::Schema("N: must be at least 2".into()));
        }
        let t = self.t.unwrap_or(self.n);
        if t > self.n {
            return Err(IoError::Schema(format!("T exceeds N ({t} > {})", self.n)));
        }
        let floor_exp = self.t_min_exponent.unwrap_or(0.9);
        let t_floor = (self.n as f64).powf(floor_exp);
        if (t as f64) < t_floor {
            return Err(IoError::Schema(format!(
                "T = {t} below the sanity floor N^{floor_exp} ≈ {t_floor:.1}"
            )));
        }
        if self.q0 < 2 {
            return Err(IoError::Schema("Q0: must be at least 2".into()));
        }
        if self.r < self.q0 {
            return Err(IoError::Schema(format!(
                "R = {} below Q0 = {}",
                self.r, self.q0
            )));
        }
        match &self.base {
            SmoothBase::Fixed(k) if *k < 2 => {
                return Err(IoError::Schema("base: fixed bound must be ≥ 2".into()))
            }
            SmoothBase::Primes(ps) => {
                if ps.is_empty() {
                    return Err(IoError::Schema("base: prime set is empty".into()));
                }
                for p in ps {
                    if !is_prime_u64(*p) {
                        return Err(IoError::Schema(format!(
                            "base: {p} is not prime"
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.degree
            .unwrap_or_else(|| self.coeffs.len().saturating_sub(1))
            .max(1)
    }

    pub fn build_group(&self) -> Result<GroupRef, IoError> {
        if let Some(id) = &self.group {
            return Ok(FilteredGroup::preset(id, self.degree())?);
        }
        let custom = self.custom_group.as_ref().expect("validated");
        Ok(custom.build(self.seed)?)
    }

    pub fn build_sequence(&self, group: &GroupRef) -> Result<PolySequence, IoError> {
        let bits = precision_bits();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (j, row) in self.coeffs.iter().enumerate() {
            if row.len() != group.dim {
                return Err(IoError::Schema(format!(
                    "coeffs[{j}]: expected {} coordinates, got {}",
                    group.dim,
                    row.len()
                )));
            }
            let mut coords = Vec::with_capacity(row.len());
            for s in row {
                coords.push(parse_scalar_literal(s, bits)?);
            }
            coeffs.push(GroupElement::new(coords));
        }
        Ok(PolySequence::from_taylor(group.clone(), coeffs)?)
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            n_len: self.n,
            t_len: self.t.unwrap_or(self.n),
            b_exp: self.b,
            e_param: self.e,
            r_param: self.r,
            q0: self.q0,
            base: self.base.clone(),
            seed: self.seed,
        }
    }
}

// ---------------------------------------------------------------------------
// exact value DTOs
// ---------------------------------------------------------------------------

/// A scalar on the wire: exact rationals as strings, balls as exact
/// midpoint/radius string pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarDto {
    Exact(String),
    Ball { mid: String, rad: String },
}

pub fn scalar_to_dto(s: &Scalar) -> ScalarDto {
    match s {
        Scalar::Exact(r) => ScalarDto::Exact(r.to_string()),
        Scalar::Ball { mid, rad } => ScalarDto::Ball {
            mid: mid.to_string(),
            rad: rad.to_string(),
        },
    }
}

fn parse_rat_strict(s: &str) -> Result<Rat, IoError> {
    parse_exact(s).ok_or_else(|| IoError::Schema(format!("bad rational literal {s:?}")))
}

pub fn scalar_from_dto(d: &ScalarDto) -> Result<Scalar, IoError> {
    Ok(match d {
        ScalarDto::Exact(s) => Scalar::from_rat(parse_rat_strict(s)?),
        ScalarDto::Ball { mid, rad } => {
            let r = parse_rat_strict(rad)?;
            if r < Rat::zero() {
                return Err(IoError::Schema("ball radius must be nonnegative".into()));
            }
            Scalar::ball(parse_rat_strict(mid)?, r)
        }
    })
}

pub type ElementDto = Vec<ScalarDto>;

pub fn element_to_dto(e: &GroupElement) -> ElementDto {
    e.coords.iter().map(scalar_to_dto).collect()
}

pub fn element_from_dto(d: &ElementDto) -> Result<GroupElement, IoError> {
    let coords: Result<Vec<Scalar>, IoError> = d.iter().map(scalar_from_dto).collect();
    Ok(GroupElement::new(coords?))
}

/// A polynomial sequence on the wire: Taylor coefficients plus the
/// structural-zero snap count observed while it was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceDto {
    pub coeffs: Vec<ElementDto>,
    #[serde(default)]
    pub snaps: usize,
}

pub fn sequence_to_dto(s: &PolySequence) -> SequenceDto {
    SequenceDto {
        coeffs: s.coeffs.iter().map(element_to_dto).collect(),
        snaps: s.snaps,
    }
}

pub fn sequence_from_dto(group: &GroupRef, d: &SequenceDto) -> Result<PolySequence, IoError> {
    let coeffs: Result<Vec<GroupElement>, IoError> =
        d.coeffs.iter().map(element_from_dto).collect();
    let mut seq = PolySequence::from_taylor(group.clone(), coeffs?)?;
    seq.snaps = d.snaps;
    Ok(seq)
}

pub fn chart_dirs_to_dto(c: &Chart) -> Vec<ElementDto> {
    c.dirs.iter().map(|d| element_to_dto(&d.elem)).collect()
}

pub fn chart_from_dirs(
    group: &GroupRef,
    dirs: &[ElementDto],
    seed: u64,
) -> Result<Chart, IoError> {
    let elems: Result<Vec<GroupElement>, IoError> = dirs.iter().map(element_from_dto).collect();
    Ok(Chart::from_basis(group.clone(), elems?, seed)?)
}

// ---------------------------------------------------------------------------
// factorisation and tree DTOs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorisationDto {
    pub epsilon: SequenceDto,
    pub g_prime: SequenceDto,
    pub gamma: SequenceDto,
    pub subgroup_dirs: Vec<ElementDto>,
    pub m_scale: u64,
    pub m0: u64,
    pub a_exp: f64,
    pub q_gamma: u64,
    pub equidist: crate::equidist::EquidistReport,
    pub smoothness: crate::factor::SmoothnessCert,
    pub rationality: crate::factor::RationalityCert,
    pub obstructions: Vec<ObstructionRecord>,
    pub issues: Vec<String>,
}

pub fn factorisation_to_dto(f: &Factorisation) -> FactorisationDto {
    FactorisationDto {
        epsilon: sequence_to_dto(&f.epsilon),
        g_prime: sequence_to_dto(&f.g_prime),
        gamma: sequence_to_dto(&f.gamma),
        subgroup_dirs: chart_dirs_to_dto(&f.subgroup),
        m_scale: f.m_scale,
        m0: f.m0,
        a_exp: f.a_exp,
        q_gamma: f.q_gamma,
        equidist: f.equidist.clone(),
        smoothness: f.smoothness.clone(),
        rationality: f.rationality.clone(),
        obstructions: f.obstructions.clone(),
        issues: f.issues.clone(),
    }
}

pub fn factorisation_from_dto(
    group: &GroupRef,
    d: &FactorisationDto,
    seed: u64,
) -> Result<Factorisation, IoError> {
    Ok(Factorisation {
        epsilon: sequence_from_dto(group, &d.epsilon)?,
        g_prime: sequence_from_dto(group, &d.g_prime)?,
        gamma: sequence_from_dto(group, &d.gamma)?,
        subgroup: chart_from_dirs(group, &d.subgroup_dirs, seed)?,
        m_scale: d.m_scale,
        m0: d.m0,
        a_exp: d.a_exp,
        q_gamma: d.q_gamma,
        equidist: d.equidist.clone(),
        smoothness: d.smoothness.clone(),
        rationality: d.rationality.clone(),
        obstructions: d.obstructions.clone(),
        issues: d.issues.clone(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeafDto {
    pub q: u64,
    pub r: u64,
    pub m_lo: i64,
    pub m_hi: i64,
    pub epsilon_tilde: SequenceDto,
    pub g_prime: SequenceDto,
    pub gamma_tilde: SequenceDto,
    pub subgroup_dirs: Vec<ElementDto>,
    pub q_gamma: u64,
    pub verification: VerificationReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitDto {
    pub q_tilde: u64,
    pub z: u64,
    pub witness: crate::equidist::Witness,
    pub children: Vec<NodeDto>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeDto {
    pub depth: usize,
    pub z_path: u64,
    pub r_path: u64,
    pub node_len: u64,
    pub factorisation: FactorisationDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<LeafDto>,
}

/// Group identification stored alongside a tree so that verification can
/// rebuild everything without the original run spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomGroupSpec>,
    pub degree: usize,
}

impl GroupDto {
    pub fn build(&self, seed: u64) -> Result<GroupRef, IoError> {
        if let Some(id) = &self.preset {
            return Ok(FilteredGroup::preset(id, self.degree)?);
        }
        match &self.custom {
            Some(c) => Ok(c.build(seed)?),
            None => Err(IoError::Schema("group block lists neither preset nor custom".into())),
        }
    }
}

pub const TREE_FORMAT: &str = "nilfactor-tree-v1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeDto {
    pub format: String,
    pub group: GroupDto,
    pub params: TreeParams,
    pub config: ConstantsConfig,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub q_final: u64,
    pub height: usize,
    pub leaf_count: usize,
    pub root: NodeDto,
}

fn node_to_dto(n: &TreeNode) -> NodeDto {
    NodeDto {
        depth: n.depth,
        z_path: n.z_path,
        r_path: n.r_path,
        node_len: n.node_len,
        factorisation: factorisation_to_dto(&n.factorisation),
        split: n.split.as_ref().map(|s| SplitDto {
            q_tilde: s.q_tilde,
            z: s.z,
            witness: s.witness.clone(),
            children: s.children.iter().map(node_to_dto).collect(),
        }),
        leaf: n.leaf.as_ref().map(|l| LeafDto {
            q: l.q,
            r: l.r,
            m_lo: l.m_lo,
            m_hi: l.m_hi,
            epsilon_tilde: sequence_to_dto(&l.epsilon_tilde),
            g_prime: sequence_to_dto(&l.g_prime),
            gamma_tilde: sequence_to_dto(&l.gamma_tilde),
            subgroup_dirs: chart_dirs_to_dto(&l.subgroup),
            q_gamma: l.q_gamma,
            verification: l.verification.clone(),
        }),
    }
}

fn node_from_dto(group: &GroupRef, d: &NodeDto, seed: u64) -> Result<TreeNode, IoError> {
    let split = match &d.split {
        None => None,
        Some(s) => {
            let children: Result<Vec<TreeNode>, IoError> = s
                .children
                .iter()
                .map(|c| node_from_dto(group, c, seed))
                .collect();
            Some(SplitData {
                q_tilde: s.q_tilde,
                z: s.z,
                witness: s.witness.clone(),
                children: children?,
            })
        }
    };
    let leaf = match &d.leaf {
        None => None,
        Some(l) => Some(Leaf {
            q: l.q,
            r: l.r,
            m_lo: l.m_lo,
            m_hi: l.m_hi,
            epsilon_tilde: sequence_from_dto(group, &l.epsilon_tilde)?,
            g_prime: sequence_from_dto(group, &l.g_prime)?,
            gamma_tilde: sequence_from_dto(group, &l.gamma_tilde)?,
            subgroup: chart_from_dirs(group, &l.subgroup_dirs, seed)?,
            q_gamma: l.q_gamma,
            verification: l.verification.clone(),
        }),
    };
    Ok(TreeNode {
        depth: d.depth,
        z_path: d.z_path,
        r_path: d.r_path,
        node_len: d.node_len,
        factorisation: factorisation_from_dto(group, &d.factorisation, seed)?,
        split,
        leaf,
    })
}

pub fn tree_to_dto(t: &FactorisationTree, group: GroupDto) -> TreeDto {
    TreeDto {
        format: TREE_FORMAT.into(),
        group,
        params: t.params.clone(),
        config: t.config.clone(),
        seed: t.params.seed,
        warnings: t.warnings.clone(),
        q_final: t.q_final,
        height: t.height,
        leaf_count: t.leaf_count,
        root: node_to_dto(&t.root),
    }
}

pub fn tree_from_dto(d: &TreeDto) -> Result<(FactorisationTree, GroupRef), IoError> {
    if d.format != TREE_FORMAT {
        return Err(IoError::Schema(format!(
            "unsupported tree format {:?} (expected {TREE_FORMAT:?})",
            d.format
        )));
    }
    let group = d.group.build(d.seed)?;
    let root = node_from_dto(&group, &d.root, d.seed)?;
    Ok((
        FactorisationTree {
            params: d.params.clone(),
            config: d.config.clone(),
            warnings: d.warnings.clone(),
            q_final: d.q_final,
            height: d.height,
            leaf_count: d.leaf_count,
            root,
        },
        group,
    ))
}

// ---------------------------------------------------------------------------
// tree re-verification
// ---------------------------------------------------------------------------

/// One leaf's re-verification outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeafCheck {
    pub q: u64,
    pub r: u64,
    pub stored_pass: bool,
    pub recomputed_pass: bool,
    /// Stored and recomputed reports agree byte for byte.
    pub matches_stored: bool,
    pub reasons: Vec<String>,
}

/// Outcome of re-verifying a stored tree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReverifyReport {
    /// The deterministic rebuild reproduces the stored file byte for byte
    /// (canonical JSON; whitespace reformatting does not count).
    pub rebuild_matches: bool,
    pub leaf_checks: Vec<LeafCheck>,
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// Re-verify a stored tree: recover the input sequence from the root
/// factorisation, rebuild the whole tree deterministically, and require the
/// rebuild to reproduce the stored file exactly (canonical JSON) with every
/// leaf verification passing.  Any hand edit to certified data is caught by
/// the byte comparison; per-leaf diffs are reported for diagnosis.
pub fn reverify_tree(d: &TreeDto) -> Result<ReverifyReport, IoError> {
    let (tree, _group) = tree_from_dto(d)?;
    let root_f = &tree.root.factorisation;
    let mut original = if root_f.epsilon.is_identity() && root_f.gamma.is_identity() {
        root_f.g_prime.clone()
    } else {
        root_f.reconstruct().map_err(crate::factor::FactorError::from)?
    };
    original.snaps = d.root.factorisation.g_prime.snaps;

    let rebuilt = crate::factor::build_tree(&original, &tree.params, &tree.config)?;
    let rebuilt_dto = tree_to_dto(&rebuilt, d.group.clone());
    let rebuild_matches = serde_json::to_string(d)? == serde_json::to_string(&rebuilt_dto)?;

    let mut reasons = Vec::new();
    if !rebuild_matches {
        reasons.push(
            "stored tree does not match its deterministic rebuild (file was edited or \
             produced by a different build)"
                .into(),
        );
    }
    let stored_leaves = tree.leaves();
    let new_leaves = rebuilt.leaves();
    if stored_leaves.len() != new_leaves.len() {
        reasons.push(format!(
            "leaf count mismatch: stored {}, rebuilt {}",
            stored_leaves.len(),
            new_leaves.len()
        ));
    }
    let mut leaf_checks = Vec::new();
    let mut leaves_ok = true;
    for (old, new) in stored_leaves.iter().zip(new_leaves.iter()) {
        let matches = serde_json::to_string(&old.verification)?
            == serde_json::to_string(&new.verification)?;
        leaves_ok &= matches && new.verification.pass;
        let mut leaf_reasons = new.verification.reasons.clone();
        if !matches {
            leaf_reasons.push("stored verification differs from the recomputed one".into());
        }
        leaf_checks.push(LeafCheck {
            q: new.q,
            r: new.r,
            stored_pass: old.verification.pass,
            recomputed_pass: new.verification.pass,
            matches_stored: matches,
            reasons: leaf_reasons,
        });
    }
    let pass = rebuild_matches
        && reasons.is_empty()
        && leaves_ok
        && stored_leaves.len() == new_leaves.len();
    Ok(ReverifyReport {
        rebuild_matches,
        leaf_checks,
        pass,
        reasons,
    })
}
