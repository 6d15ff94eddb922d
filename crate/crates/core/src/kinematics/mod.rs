//! Robot models over URDF chains: symbolic forward kinematics, rotation
//! representations, Jacobians and manipulability.
//!
//! All link frames are expressed in the model's world frame, i.e. the base
//! link composed with the optional registered base offset. The joint vector
//! `q` lists actuated joints below the base link in document order.

pub mod spatial;

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;
use nalgebra::DVector;
use thiserror::Error;

use crate::expr::{self, leaf_block, Expr, ExprError, LeafKind};
use crate::urdf::{parse_urdf, JointType, UrdfError, UrdfJoint, UrdfModel, CONTINUOUS_LIMIT};

use spatial::{axis_angle, matrix_to_quaternion, matrix_to_rpy, origin_transform, position_of, rotation_of, transform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error(transparent)]
    Urdf(#[from] UrdfError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("link `{0}` is already registered")]
    DuplicateLink(String),
    #[error("expected shape {expected:?}, got {got:?}")]
    Shape { expected: (usize, usize), got: (usize, usize) },
    #[error("rotation is not orthonormal (error {0:e})")]
    NotOrthonormal(f64),
    #[error("manipulability supports at most 3 rows, got {0}")]
    TooManyRows(usize),
    #[error("row index {0} out of range 0..6")]
    BadRow(usize),
    #[error("derivative orders must be distinct and include 0, got {0:?}")]
    TimeDeriv(Vec<usize>),
}

/// Check derivative orders: non-empty, distinct, containing 0. Returns them
/// sorted.
pub(crate) fn check_orders(orders: &[usize]) -> Option<Vec<usize>> {
    let mut v = orders.to_vec();
    v.sort_unstable();
    let distinct = v.windows(2).all(|w| w[0] != w[1]);
    (distinct && v.first() == Some(&0)).then_some(v)
}

/// Rotation in all supported representations.
#[derive(Debug, Clone)]
pub struct RotationReps {
    /// 3x3 rotation matrix.
    pub matrix: Expr,
    /// `(x, y, z, w)`, unit, `w >= 0`.
    pub quaternion: Expr,
    /// Extrinsic roll, pitch, yaw.
    pub rpy: Expr,
}

#[derive(Debug, Clone)]
struct ExtraLink {
    parent: String,
    transform: Expr,
}

#[derive(Debug, Clone)]
pub struct RobotModel {
    name: String,
    urdf: Arc<UrdfModel>,
    base_link: String,
    time_deriv: Vec<usize>,
    base_offset: Option<Expr>,
    tips: IndexMap<String, ExtraLink>,
    /// Indices into `urdf.joints` of the actuated joints below the base.
    actuated: Vec<usize>,
    /// Joint name to position in `q`.
    q_index: HashMap<String, usize>,
}

impl RobotModel {
    /// Model rooted at the URDF root link.
    pub fn new(name: &str, urdf: UrdfModel, time_deriv: &[usize]) -> Result<Self, KinematicsError> {
        let base = urdf.root.clone();
        Self::with_base(name, urdf, &base, time_deriv)
    }

    /// Model over the subtree below `base_link`.
    pub fn with_base(name: &str, urdf: UrdfModel, base_link: &str, time_deriv: &[usize]) -> Result<Self, KinematicsError> {
        let time_deriv = check_orders(time_deriv).ok_or_else(|| KinematicsError::TimeDeriv(time_deriv.to_vec()))?;
        if !urdf.has_link(base_link) {
            return Err(KinematicsError::UnknownLink(base_link.to_string()));
        }
        let actuated: Vec<usize> = urdf
            .joints
            .iter()
            .enumerate()
            .filter(|(_, j)| j.joint_type.is_actuated() && urdf.extract_chain(base_link, &j.parent).is_ok())
            .map(|(i, _)| i)
            .collect();
        let q_index = actuated.iter().enumerate().map(|(k, &i)| (urdf.joints[i].name.clone(), k)).collect();
        Ok(RobotModel {
            name: name.to_string(),
            urdf: Arc::new(urdf),
            base_link: base_link.to_string(),
            time_deriv,
            base_offset: None,
            tips: IndexMap::new(),
            actuated,
            q_index,
        })
    }

    pub fn from_urdf_str(name: &str, document: &str, time_deriv: &[usize]) -> Result<Self, KinematicsError> {
        Self::new(name, parse_urdf(document)?, time_deriv)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn urdf(&self) -> &UrdfModel {
        &self.urdf
    }

    pub fn base_link(&self) -> &str {
        &self.base_link
    }

    pub fn time_deriv(&self) -> &[usize] {
        &self.time_deriv
    }

    pub fn ndof(&self) -> usize {
        self.actuated.len()
    }

    pub fn actuated_joints(&self) -> impl Iterator<Item = &UrdfJoint> {
        self.actuated.iter().map(|&i| &self.urdf.joints[i])
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.actuated_joints().map(|j| j.name.clone()).collect()
    }

    /// Position lower limits; `-inf` for continuous joints.
    pub fn lower_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.ndof(), self.actuated_joints().map(|j| j.lower))
    }

    /// Position upper limits; `+inf` for continuous joints.
    pub fn upper_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.ndof(), self.actuated_joints().map(|j| j.upper))
    }

    /// Position limits with infinite bounds replaced by the continuous-joint
    /// sentinel.
    pub fn finite_limits(&self) -> (DVector<f64>, DVector<f64>) {
        let clamp = |v: f64| v.clamp(-CONTINUOUS_LIMIT, CONTINUOUS_LIMIT);
        (self.lower_limits().map(clamp), self.upper_limits().map(clamp))
    }

    /// Absolute velocity bounds; `inf` where the URDF gives none.
    pub fn velocity_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.ndof(), self.actuated_joints().map(|j| j.velocity))
    }

    /// URDF links below the base plus registered tips.
    pub fn links(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .urdf
            .links
            .iter()
            .filter(|l| self.urdf.extract_chain(&self.base_link, l).is_ok())
            .cloned()
            .collect();
        out.extend(self.tips.keys().cloned());
        out
    }

    pub fn has_link(&self, link: &str) -> bool {
        self.tips.contains_key(link) || self.urdf.extract_chain(&self.base_link, link).is_ok()
    }

    /// Fixed 4x4 transform placed in front of the base link.
    pub fn register_base_offset(&mut self, t: Expr) -> Result<(), KinematicsError> {
        if t.shape() != (4, 4) {
            return Err(KinematicsError::Shape { expected: (4, 4), got: t.shape() });
        }
        self.base_offset = Some(t);
        Ok(())
    }

    /// Extra fixed frame `name` attached to `parent` by `t`.
    pub fn register_tip(&mut self, name: &str, parent: &str, t: Expr) -> Result<(), KinematicsError> {
        if t.shape() != (4, 4) {
            return Err(KinematicsError::Shape { expected: (4, 4), got: t.shape() });
        }
        if !self.has_link(parent) {
            return Err(KinematicsError::UnknownLink(parent.to_string()));
        }
        if self.has_link(name) || self.urdf.has_link(name) {
            return Err(KinematicsError::DuplicateLink(name.to_string()));
        }
        self.tips.insert(name.to_string(), ExtraLink { parent: parent.to_string(), transform: t });
        Ok(())
    }

    fn check_q(&self, q: &Expr) -> Result<(), KinematicsError> {
        if q.shape() != (self.ndof(), 1) {
            return Err(KinematicsError::Shape { expected: (self.ndof(), 1), got: q.shape() });
        }
        Ok(())
    }

    fn world(&self) -> Expr {
        self.base_offset.clone().unwrap_or_else(|| Expr::identity(4))
    }

    /// Local transform of one joint: origin followed by its motion.
    pub fn joint_transform(&self, joint: &UrdfJoint, q: &Expr) -> Result<Expr, KinematicsError> {
        let origin = origin_transform(joint.xyz, joint.rpy);
        let motion = match joint.joint_type {
            JointType::Fixed => return Ok(origin),
            _ => {
                let k = self.q_index[&joint.name];
                let qi = q.elem(k);
                match joint.joint_type {
                    JointType::Prismatic => {
                        spatial::translation(&Expr::column(&joint.axis).try_elem_mul(&qi)?)?
                    }
                    _ => transform(&axis_angle(joint.axis, &qi)?, &Expr::zeros(3, 1))?,
                }
            }
        };
        Ok(&origin * &motion)
    }

    /// World transforms after each joint of the chain to `link` (URDF links
    /// only), plus the chain itself.
    fn chain_frames(&self, link: &str, q: &Expr) -> Result<(Vec<&UrdfJoint>, Vec<Expr>), KinematicsError> {
        let chain = self.urdf.extract_chain(&self.base_link, link).map_err(|e| match e {
            UrdfError::UnknownLink(l) => KinematicsError::UnknownLink(l),
            _ => KinematicsError::UnknownLink(link.to_string()),
        })?;
        let mut frames = Vec::with_capacity(chain.len());
        let mut t = self.world();
        for j in &chain {
            t = &t * &self.joint_transform(j, q)?;
            frames.push(t.clone());
        }
        Ok((chain, frames))
    }

    /// Parent URDF link of `link` and the fixed transform from it.
    fn resolve(&self, link: &str) -> Result<(String, Option<Expr>), KinematicsError> {
        let mut extra: Option<Expr> = None;
        let mut cur = link.to_string();
        while let Some(tip) = self.tips.get(&cur) {
            extra = Some(match extra {
                None => tip.transform.clone(),
                Some(e) => &tip.transform * &e,
            });
            cur = tip.parent.clone();
        }
        Ok((cur, extra))
    }

    /// 4x4 world transform of `link` at configuration `q`.
    pub fn global_link_transform(&self, link: &str, q: &Expr) -> Result<Expr, KinematicsError> {
        self.check_q(q)?;
        let (urdf_link, extra) = self.resolve(link)?;
        let (_, frames) = self.chain_frames(&urdf_link, q)?;
        let t = frames.last().cloned().unwrap_or_else(|| self.world());
        Ok(match extra {
            Some(e) => &t * &e,
            None => t,
        })
    }

    pub fn global_link_position(&self, link: &str, q: &Expr) -> Result<Expr, KinematicsError> {
        Ok(position_of(&self.global_link_transform(link, q)?))
    }

    pub fn global_link_rotation(&self, link: &str, q: &Expr) -> Result<Expr, KinematicsError> {
        Ok(rotation_of(&self.global_link_transform(link, q)?))
    }

    pub fn global_link_rotation_representations(&self, link: &str, q: &Expr) -> Result<RotationReps, KinematicsError> {
        let matrix = self.global_link_rotation(link, q)?;
        let quaternion = matrix_to_quaternion(&matrix)?;
        let rpy = matrix_to_rpy(&matrix)?;
        Ok(RotationReps { matrix, quaternion, rpy })
    }

    /// 6 x ndof world-frame Jacobian; rows are linear then angular velocity.
    pub fn geometric_jacobian(&self, link: &str, q: &Expr) -> Result<Expr, KinematicsError> {
        self.check_q(q)?;
        let (urdf_link, extra) = self.resolve(link)?;
        let (chain, frames) = self.chain_frames(&urdf_link, q)?;
        let end = frames.last().cloned().unwrap_or_else(|| self.world());
        let end = match extra {
            Some(e) => &end * &e,
            None => end,
        };
        let pe = position_of(&end);
        let mut cols: Vec<Expr> = vec![Expr::zeros(6, 1); self.ndof()];
        for (j, frame) in chain.iter().zip(&frames) {
            if !j.joint_type.is_actuated() {
                continue;
            }
            let z = &rotation_of(frame) * &Expr::column(&j.axis);
            let col = match j.joint_type {
                JointType::Prismatic => Expr::vcat(&[&z, &Expr::zeros(3, 1)])?,
                _ => {
                    let lin = z.try_cross(&pe.try_sub(&position_of(frame))?)?;
                    Expr::vcat(&[&lin, &z])?
                }
            };
            cols[self.q_index[&j.name]] = col;
        }
        if cols.is_empty() {
            return Ok(Expr::zeros(6, 0));
        }
        Ok(Expr::hcat(&cols.iter().collect::<Vec<_>>())?)
    }

    /// 6 x ndof derivative of `(position, rpy)` with respect to `q`.
    /// Entries blow up near pitch = ±π/2.
    pub fn analytical_jacobian(&self, link: &str, q: &Expr) -> Result<Expr, KinematicsError> {
        self.check_q(q)?;
        let qt = leaf_block("q", LeafKind::Variable, self.ndof(), 1);
        let t = self.global_link_transform(link, &qt)?;
        let pose = Expr::vcat(&[&position_of(&t), &matrix_to_rpy(&rotation_of(&t))?])?;
        let j = expr::jacobian(&pose, &qt)?;
        Ok(expr::substitute(&j, &[(&qt, q)])?)
    }

    /// `sqrt(det(J_s J_s^T))` for the geometric Jacobian rows `rows`
    /// (0..3 linear, 3..6 angular), at most three rows.
    pub fn manipulability(&self, link: &str, q: &Expr, rows: &[usize]) -> Result<Expr, KinematicsError> {
        if rows.len() > 3 {
            return Err(KinematicsError::TooManyRows(rows.len()));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= 6) {
            return Err(KinematicsError::BadRow(r));
        }
        let j = self.geometric_jacobian(link, q)?.select_rows(rows);
        let d = (&j * &j.transpose()).det()?;
        // rounding can push a singular det slightly negative
        let d = d.as_scalar()?.clone();
        let zero = crate::expr::Scalar::constant(0.0);
        Ok(Expr::scalar(crate::expr::Scalar::select(&d, &d, &zero).sqrt()))
    }
}
