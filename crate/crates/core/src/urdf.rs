//! URDF reader for the kinematic subset: `robot`, `link`, and `joint` with
//! `origin`, `axis`, `limit`, `parent`, `child`.
//!
//! Visual, collision and inertial elements are skipped. Origins default to
//! identity and axes to `(1, 0, 0)`. `rpy` is read as extrinsic x-y-z
//! rotations, i.e. `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

/// Finite stand-in for the unbounded range of continuous joints, for solvers
/// that need finite bounds.
pub const CONTINUOUS_LIMIT: f64 = std::f64::consts::PI * 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UrdfError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("root element must be <robot>, found <{0}>")]
    NotARobot(String),
    #[error("missing attribute `{attr}` on <{element}>")]
    MissingAttribute { element: String, attr: String },
    #[error("invalid number list `{0}`")]
    InvalidNumber(String),
    #[error("joint `{joint}` has unsupported type `{kind}`")]
    UnsupportedJointType { joint: String, kind: String },
    #[error("joint `{0}` uses <mimic>, which is not supported")]
    Mimic(String),
    #[error("joint `{0}` needs a <limit> element")]
    MissingLimits(String),
    #[error("joint `{joint}` has lower limit {lower} above upper limit {upper}")]
    InvertedLimits { joint: String, lower: f64, upper: f64 },
    #[error("joint `{0}` has a zero axis")]
    ZeroAxis(String),
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("joint `{joint}` references unknown link `{link}`")]
    DanglingLink { joint: String, link: String },
    #[error("link `{0}` has more than one parent joint")]
    MultipleParents(String),
    #[error("more than one root link: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("kinematic graph has no root (cycle)")]
    NoRoot,
    #[error("kinematic graph contains a cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("link `{tip}` is not below `{base}`")]
    NotInSubtree { base: String, tip: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointType {
    Fixed,
    Revolute,
    Continuous,
    Prismatic,
}

impl JointType {
    pub fn is_actuated(self) -> bool {
        self != JointType::Fixed
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JointType::Fixed => "fixed",
            JointType::Revolute => "revolute",
            JointType::Continuous => "continuous",
            JointType::Prismatic => "prismatic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrdfJoint {
    pub name: String,
    pub joint_type: JointType,
    pub parent: String,
    pub child: String,
    /// Origin translation in meters.
    pub xyz: [f64; 3],
    /// Origin roll, pitch, yaw in radians (extrinsic x-y-z).
    pub rpy: [f64; 3],
    /// Unit motion axis in the joint frame.
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
    /// Absolute velocity bound; infinite when not given.
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrdfModel {
    pub name: String,
    pub links: Vec<String>,
    pub joints: Vec<UrdfJoint>,
    pub root: String,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], UrdfError> {
    let vals: Vec<f64> = s
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| UrdfError::InvalidNumber(s.to_string()))?;
    vals.try_into().map_err(|_| UrdfError::InvalidNumber(s.to_string()))
}

fn parse_f64(s: &str) -> Result<f64, UrdfError> {
    s.trim().parse().map_err(|_| UrdfError::InvalidNumber(s.to_string()))
}

fn required<'a>(node: roxmltree::Node<'a, '_>, attr: &str) -> Result<&'a str, UrdfError> {
    node.attribute(attr).ok_or_else(|| UrdfError::MissingAttribute {
        element: node.tag_name().name().to_string(),
        attr: attr.to_string(),
    })
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, tag: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.has_tag_name(tag))
}

fn parse_joint(node: roxmltree::Node) -> Result<UrdfJoint, UrdfError> {
    let name = required(node, "name")?.to_string();
    let kind = required(node, "type")?;
    let joint_type = match kind {
        "fixed" => JointType::Fixed,
        "revolute" => JointType::Revolute,
        "continuous" => JointType::Continuous,
        "prismatic" => JointType::Prismatic,
        other => return Err(UrdfError::UnsupportedJointType { joint: name, kind: other.to_string() }),
    };
    if child(node, "mimic").is_some() {
        return Err(UrdfError::Mimic(name));
    }
    let parent = child(node, "parent")
        .ok_or_else(|| UrdfError::MissingAttribute { element: "joint".into(), attr: "parent".into() })
        .and_then(|p| required(p, "link"))?
        .to_string();
    let child_link = child(node, "child")
        .ok_or_else(|| UrdfError::MissingAttribute { element: "joint".into(), attr: "child".into() })
        .and_then(|p| required(p, "link"))?
        .to_string();

    let (mut xyz, mut rpy) = ([0.0; 3], [0.0; 3]);
    if let Some(o) = child(node, "origin") {
        if let Some(s) = o.attribute("xyz") {
            xyz = parse_vec3(s)?;
        }
        if let Some(s) = o.attribute("rpy") {
            rpy = parse_vec3(s)?;
        }
    }
    let mut axis = match child(node, "axis").and_then(|a| a.attribute("xyz")) {
        Some(s) => parse_vec3(s)?,
        None => [1.0, 0.0, 0.0],
    };
    let n = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    if joint_type.is_actuated() {
        if n == 0.0 || !n.is_finite() {
            return Err(UrdfError::ZeroAxis(name));
        }
        axis.iter_mut().for_each(|a| *a /= n);
    }

    let limit = child(node, "limit");
    let velocity = match limit.and_then(|l| l.attribute("velocity")) {
        Some(v) => parse_f64(v)?.abs(),
        None => f64::INFINITY,
    };
    let (lower, upper) = match joint_type {
        JointType::Revolute | JointType::Prismatic => {
            let l = limit.ok_or_else(|| UrdfError::MissingLimits(name.clone()))?;
            let lower = l.attribute("lower").map(parse_f64).transpose()?.unwrap_or(0.0);
            let upper = l.attribute("upper").map(parse_f64).transpose()?.unwrap_or(0.0);
            if lower > upper {
                return Err(UrdfError::InvertedLimits { joint: name, lower, upper });
            }
            (lower, upper)
        }
        JointType::Continuous => (f64::NEG_INFINITY, f64::INFINITY),
        JointType::Fixed => (0.0, 0.0),
    };

    Ok(UrdfJoint { name, joint_type, parent, child: child_link, xyz, rpy, axis, lower, upper, velocity })
}

/// Parse and validate a URDF document.
pub fn parse_urdf(document: &str) -> Result<UrdfModel, UrdfError> {
    let doc = roxmltree::Document::parse(document).map_err(|e| UrdfError::Xml(e.to_string()))?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return Err(UrdfError::NotARobot(robot.tag_name().name().to_string()));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();

    let mut links = Vec::new();
    let mut link_set = HashSet::new();
    let mut joints = Vec::new();
    let mut joint_names = HashSet::new();
    for node in robot.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "link" => {
                let l = required(node, "name")?.to_string();
                if !link_set.insert(l.clone()) {
                    return Err(UrdfError::Duplicate { kind: "link", name: l });
                }
                links.push(l);
            }
            "joint" => {
                let j = parse_joint(node)?;
                if !joint_names.insert(j.name.clone()) {
                    return Err(UrdfError::Duplicate { kind: "joint", name: j.name });
                }
                joints.push(j);
            }
            _ => {}
        }
    }

    let mut parent_of: HashMap<&str, &str> = HashMap::new();
    for j in &joints {
        for l in [&j.parent, &j.child] {
            if !link_set.contains(l) {
                return Err(UrdfError::DanglingLink { joint: j.name.clone(), link: l.clone() });
            }
        }
        if parent_of.insert(&j.child, &j.parent).is_some() {
            return Err(UrdfError::MultipleParents(j.child.clone()));
        }
    }
    let roots: Vec<String> = links.iter().filter(|l| !parent_of.contains_key(l.as_str())).cloned().collect();
    let root = match roots.len() {
        0 => return Err(UrdfError::NoRoot),
        1 => roots[0].clone(),
        _ => return Err(UrdfError::MultipleRoots(roots)),
    };

    // every link must be reachable from the root; the rest hang off a cycle
    let mut reached = HashSet::from([root.as_str()]);
    let mut queue = VecDeque::from([root.as_str()]);
    while let Some(l) = queue.pop_front() {
        for j in joints.iter().filter(|j| j.parent == l) {
            if reached.insert(&j.child) {
                queue.push_back(&j.child);
            }
        }
    }
    if reached.len() != links.len() {
        let stuck = links.iter().filter(|l| !reached.contains(l.as_str())).cloned().collect();
        return Err(UrdfError::Cycle(stuck));
    }

    Ok(UrdfModel { name, links, joints, root })
}

impl UrdfModel {
    pub fn has_link(&self, link: &str) -> bool {
        self.links.iter().any(|l| l == link)
    }

    pub fn parent_joint(&self, link: &str) -> Option<&UrdfJoint> {
        self.joints.iter().find(|j| j.child == link)
    }

    pub fn joint(&self, name: &str) -> Option<&UrdfJoint> {
        self.joints.iter().find(|j| j.name == name)
    }

    /// Joints on the path from `base` down to `tip`, ordered base to tip.
    pub fn extract_chain(&self, base: &str, tip: &str) -> Result<Vec<&UrdfJoint>, UrdfError> {
        for l in [base, tip] {
            if !self.has_link(l) {
                return Err(UrdfError::UnknownLink(l.to_string()));
            }
        }
        let mut chain = Vec::new();
        let mut cur = tip;
        while cur != base {
            match self.parent_joint(cur) {
                Some(j) => {
                    chain.push(j);
                    cur = &j.parent;
                }
                None => return Err(UrdfError::NotInSubtree { base: base.into(), tip: tip.into() }),
            }
        }
        chain.reverse();
        Ok(chain)
    }

    /// Serialize the supported subset back to URDF.
    pub fn to_urdf_string(&self) -> String {
        let mut s = String::new();
        let v3 = |v: &[f64; 3]| format!("{:?} {:?} {:?}", v[0], v[1], v[2]);
        let _ = writeln!(s, "<robot name=\"{}\">", self.name);
        for l in &self.links {
            let _ = writeln!(s, "  <link name=\"{l}\"/>");
        }
        for j in &self.joints {
            let _ = writeln!(s, "  <joint name=\"{}\" type=\"{}\">", j.name, j.joint_type.as_str());
            let _ = writeln!(s, "    <parent link=\"{}\"/>", j.parent);
            let _ = writeln!(s, "    <child link=\"{}\"/>", j.child);
            let _ = writeln!(s, "    <origin xyz=\"{}\" rpy=\"{}\"/>", v3(&j.xyz), v3(&j.rpy));
            if j.joint_type.is_actuated() {
                let _ = writeln!(s, "    <axis xyz=\"{}\"/>", v3(&j.axis));
            }
            let vel = if j.velocity.is_finite() { format!(" velocity=\"{:?}\"", j.velocity) } else { String::new() };
            match j.joint_type {
                JointType::Revolute | JointType::Prismatic => {
                    let _ = writeln!(s, "    <limit lower=\"{:?}\" upper=\"{:?}\"{vel}/>", j.lower, j.upper);
                }
                JointType::Continuous if !vel.is_empty() => {
                    let _ = writeln!(s, "    <limit{vel}/>");
                }
                _ => {}
            }
            let _ = writeln!(s, "  </joint>");
        }
        s.push_str("</robot>\n");
        s
    }
}
