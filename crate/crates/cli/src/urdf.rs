//! URDF-subset parsing into a [`KinematicChain`].
//!
//! Supported elements: `robot`, `link` (name only), `joint` with type
//! `revolute`, `prismatic`, `fixed` or `continuous`, plus per-joint
//! `origin xyz rpy`, `axis xyz`, `limit lower upper` and `parent`/`child`
//! links. A `continuous` joint maps to a revolute with limits [-pi, pi].
//! One extension: a `masked="true"` attribute on a joint keeps it in the
//! chain but excludes it from position control (it contributes only its
//! origin transform). Inertial, visual and collision tags are ignored.
//!
//! The file must describe a single serial path: exactly one root link and
//! no link with two child joints.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use roxmltree::{Document, Node};

use mdn_ik_core::chain::{ChainError, Joint, JointKind, JointLimits, KinematicChain};

#[derive(Debug, thiserror::Error)]
pub enum UrdfError {
    #[error("XML parse error at line {line}: {message}")]
    Xml { line: u32, message: String },
    #[error("line {line}: <{element}> is missing attribute '{attribute}'")]
    MissingAttribute {
        element: String,
        attribute: String,
        line: u32,
    },
    #[error("line {line}: cannot parse '{value}' as {expected}")]
    BadValue {
        value: String,
        expected: &'static str,
        line: u32,
    },
    #[error("line {line}: unknown joint type '{value}'")]
    UnknownJointType { value: String, line: u32 },
    #[error("{0}")]
    Structure(String),
    #[error("unsupported topology: {0}")]
    Topology(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("cannot read '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

struct JointSpec {
    name: String,
    kind: JointKind,
    xyz: Vector3<f64>,
    rpy: Vector3<f64>,
    axis: Vector3<f64>,
    limits: Option<JointLimits>,
    masked: bool,
    parent: String,
    child: String,
}

/// Parse a URDF-subset document into a serial chain, joints ordered base
/// to tip.
pub fn parse_chain(source: &str) -> Result<KinematicChain, UrdfError> {
    let doc = Document::parse(source).map_err(|e| UrdfError::Xml {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(UrdfError::Structure(format!(
            "expected <robot> root element, found <{}>",
            robot.tag_name().name()
        )));
    }
    let robot_name = robot.attribute("name").unwrap_or("robot").to_string();

    let mut links = BTreeSet::new();
    for link in robot.children().filter(element_named("link")) {
        let name = require_attr(&doc, &link, "name")?;
        if !links.insert(name.to_string()) {
            return Err(UrdfError::Structure(format!("duplicate link '{name}'")));
        }
    }

    let mut joints = Vec::new();
    let mut joint_names = BTreeSet::new();
    for node in robot.children().filter(element_named("joint")) {
        let spec = parse_joint(&doc, &node)?;
        if !joint_names.insert(spec.name.clone()) {
            return Err(UrdfError::Structure(format!(
                "duplicate joint '{}'",
                spec.name
            )));
        }
        for link in [&spec.parent, &spec.child] {
            if !links.contains(link) {
                return Err(UrdfError::Structure(format!(
                    "joint '{}' references undeclared link '{link}'",
                    spec.name
                )));
            }
        }
        joints.push(spec);
    }

    let ordered = order_serial(&links, joints)?;
    let chain_joints = ordered
        .into_iter()
        .map(|spec| {
            Joint::new(
                spec.name,
                spec.kind,
                spec.xyz,
                spec.rpy,
                spec.axis,
                spec.limits,
                spec.masked,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(KinematicChain::new(robot_name, chain_joints))
}

/// Parse a URDF file from disk.
pub fn load_chain(path: impl AsRef<Path>) -> Result<KinematicChain, UrdfError> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|source| UrdfError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_chain(&source)
}

fn element_named(name: &'static str) -> impl Fn(&Node) -> bool {
    move |n: &Node| n.is_element() && n.tag_name().name() == name
}

fn line_of(doc: &Document, node: &Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

fn require_attr<'a>(
    doc: &Document,
    node: &Node<'a, '_>,
    attribute: &str,
) -> Result<&'a str, UrdfError> {
    node.attribute(attribute).ok_or_else(|| UrdfError::MissingAttribute {
        element: node.tag_name().name().to_string(),
        attribute: attribute.to_string(),
        line: line_of(doc, node),
    })
}

fn parse_vector3(doc: &Document, node: &Node, value: &str) -> Result<Vector3<f64>, UrdfError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    let bad = || UrdfError::BadValue {
        value: value.to_string(),
        expected: "three space-separated numbers",
        line: line_of(doc, node),
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part.parse::<f64>().map_err(|_| bad())?;
    }
    Ok(Vector3::new(out[0], out[1], out[2]))
}

fn parse_scalar(doc: &Document, node: &Node, attribute: &str) -> Result<f64, UrdfError> {
    let value = require_attr(doc, node, attribute)?;
    value.parse::<f64>().map_err(|_| UrdfError::BadValue {
        value: value.to_string(),
        expected: "a number",
        line: line_of(doc, node),
    })
}

fn parse_joint(doc: &Document, node: &Node) -> Result<JointSpec, UrdfError> {
    let name = require_attr(doc, node, "name")?.to_string();
    let type_str = require_attr(doc, node, "type")?;
    let (kind, continuous) = match type_str {
        "revolute" => (JointKind::Revolute, false),
        "continuous" => (JointKind::Revolute, true),
        "prismatic" => (JointKind::Prismatic, false),
        "fixed" => (JointKind::Fixed, false),
        other => {
            return Err(UrdfError::UnknownJointType {
                value: other.to_string(),
                line: line_of(doc, node),
            })
        }
    };
    let masked = matches!(node.attribute("masked"), Some("true") | Some("1"));

    let mut xyz = Vector3::zeros();
    let mut rpy = Vector3::zeros();
    if let Some(origin) = node.children().find(element_named("origin")) {
        if let Some(v) = origin.attribute("xyz") {
            xyz = parse_vector3(doc, &origin, v)?;
        }
        if let Some(v) = origin.attribute("rpy") {
            rpy = parse_vector3(doc, &origin, v)?;
        }
    }

    let mut axis = Vector3::x();
    if let Some(axis_node) = node.children().find(element_named("axis")) {
        let v = require_attr(doc, &axis_node, "xyz")?;
        axis = parse_vector3(doc, &axis_node, v)?;
    }
    if kind != JointKind::Fixed {
        let norm_sq = axis.dot(&axis);
        if norm_sq <= 0.0 || !norm_sq.is_finite() {
            return Err(UrdfError::BadValue {
                value: format!("{} {} {}", axis.x, axis.y, axis.z),
                expected: "a nonzero axis",
                line: line_of(doc, node),
            });
        }
        // Normalize only when the file carries a non-unit axis, so an
        // already-unit axis round-trips bit-exactly.
        if (norm_sq - 1.0).abs() > 1e-12 {
            axis /= norm_sq.sqrt();
        }
    }

    let limits = if continuous {
        Some(JointLimits::new(-PI, PI).expect("constant limits"))
    } else if kind == JointKind::Fixed {
        None
    } else {
        let limit_node = node.children().find(element_named("limit")).ok_or_else(|| {
            UrdfError::Chain(ChainError::MissingLimits {
                joint: name.clone(),
            })
        })?;
        let lower = parse_scalar(doc, &limit_node, "lower")?;
        let upper = parse_scalar(doc, &limit_node, "upper")?;
        Some(JointLimits::new(lower, upper).ok_or(ChainError::InvalidLimits {
            joint: name.clone(),
        })?)
    };

    let parent = require_attr(doc, &node.children().find(element_named("parent")).ok_or_else(
        || UrdfError::MissingAttribute {
            element: "joint".to_string(),
            attribute: "parent".to_string(),
            line: line_of(doc, node),
        },
    )?, "link")?
    .to_string();
    let child = require_attr(doc, &node.children().find(element_named("child")).ok_or_else(
        || UrdfError::MissingAttribute {
            element: "joint".to_string(),
            attribute: "child".to_string(),
            line: line_of(doc, node),
        },
    )?, "link")?
    .to_string();

    Ok(JointSpec {
        name,
        kind,
        xyz,
        rpy,
        axis,
        limits,
        masked,
        parent,
        child,
    })
}

/// Order joints base-to-tip, rejecting branches, cycles and forests.
fn order_serial(
    links: &BTreeSet<String>,
    joints: Vec<JointSpec>,
) -> Result<Vec<JointSpec>, UrdfError> {
    let mut child_links = BTreeSet::new();
    for j in &joints {
        if !child_links.insert(j.child.clone()) {
            return Err(UrdfError::Topology(format!(
                "link '{}' is the child of more than one joint",
                j.child
            )));
        }
    }
    let mut roots = links.iter().filter(|l| !child_links.contains(*l));
    let root = match (roots.next(), roots.next()) {
        (Some(root), None) => root.clone(),
        (Some(a), Some(b)) => {
            return Err(UrdfError::Topology(format!(
                "multiple root links ('{a}', '{b}'); the chain must be connected"
            )))
        }
        (None, _) => {
            return Err(UrdfError::Topology(
                "no root link; the joint graph contains a cycle".to_string(),
            ))
        }
    };

    let mut by_parent: BTreeMap<String, Vec<JointSpec>> = BTreeMap::new();
    for j in joints {
        by_parent.entry(j.parent.clone()).or_default().push(j);
    }

    let mut ordered = Vec::new();
    let mut current = root;
    while let Some(mut children) = by_parent.remove(&current) {
        if children.len() > 1 {
            return Err(UrdfError::Topology(format!(
                "link '{current}' has {} child joints; branching chains are not supported",
                children.len()
            )));
        }
        let joint = children.pop().expect("nonempty");
        current = joint.child.clone();
        ordered.push(joint);
    }
    if !by_parent.is_empty() {
        let stranded: Vec<&String> = by_parent.keys().collect();
        return Err(UrdfError::Topology(format!(
            "joints under {stranded:?} are not connected to the base-to-tip path"
        )));
    }
    Ok(ordered)
}

/// Serialize a chain back to the URDF subset with full round-trip decimal
/// precision; reparsing yields an identical fingerprint.
pub fn chain_to_urdf(chain: &KinematicChain) -> String {
    let f = |v: f64| format!("{v:.16e}");
    let vec3 = |v: Vector3<f64>| format!("{} {} {}", f(v.x), f(v.y), f(v.z));
    let mut out = String::new();
    let _ = writeln!(out, "<robot name=\"{}\">", chain.name());
    for i in 0..=chain.joints().len() {
        let _ = writeln!(out, "  <link name=\"link{i}\"/>");
    }
    for (i, joint) in chain.joints().iter().enumerate() {
        let masked = if joint.masked() { " masked=\"true\"" } else { "" };
        let _ = writeln!(
            out,
            "  <joint name=\"{}\" type=\"{}\"{masked}>",
            joint.name(),
            joint.kind().as_str()
        );
        let _ = writeln!(out, "    <parent link=\"link{i}\"/>");
        let _ = writeln!(out, "    <child link=\"link{}\"/>", i + 1);
        let _ = writeln!(
            out,
            "    <origin xyz=\"{}\" rpy=\"{}\"/>",
            vec3(joint.origin_xyz()),
            vec3(joint.origin_rpy())
        );
        if joint.kind() != JointKind::Fixed {
            let _ = writeln!(out, "    <axis xyz=\"{}\"/>", vec3(joint.axis()));
            if let Some(limits) = joint.limits() {
                let _ = writeln!(
                    out,
                    "    <limit lower=\"{}\" upper=\"{}\"/>",
                    f(limits.lower),
                    f(limits.upper)
                );
            }
        }
        let _ = writeln!(out, "  </joint>");
    }
    out.push_str("</robot>\n");
    out
}
