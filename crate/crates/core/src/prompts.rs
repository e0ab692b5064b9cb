//! Structured JSON prompts and their 8-d condition embedding.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{validate_pose, ContactPose, SensorModality, ValidationMode};
use crate::math::round;

pub const SHORT_KEYS: [&str; 2] = ["sensor_context", "object_pose"];
pub const LONG_KEYS: [&str; 6] = [
    "object_description",
    "contact_description",
    "sensor_context",
    "style_tags",
    "negatives",
    "object_pose",
];
const POSE_KEYS: [&str; 4] = ["x", "y", "z", "yaw"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptSchema {
    Short,
    Long,
}

impl core::str::FromStr for PromptSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" => Ok(Self::Short),
            "long" => Ok(Self::Long),
            other => Err(Error::SchemaMismatch(format!("unknown schema `{other}`"))),
        }
    }
}

/// Free-text fields of the long schema.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LongFields {
    pub object_description: String,
    pub contact_description: String,
    pub style_tags: Vec<String>,
    pub negatives: Vec<String>,
}

/// Long-schema text keyed by object id, with a fallback entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateTable {
    pub default: LongFields,
    #[serde(default)]
    pub objects: BTreeMap<String, LongFields>,
}

impl TemplateTable {
    pub fn lookup(&self, object_id: &str) -> &LongFields {
        self.objects.get(object_id).unwrap_or(&self.default)
    }
}

impl Default for TemplateTable {
    fn default() -> Self {
        Self {
            default: LongFields {
                object_description: "a rigid 3D-printed indenter".into(),
                contact_description: "the indenter presses into the soft sensor skin".into(),
                style_tags: ["tactile image", "high resolution", "realistic"]
                    .map(String::from)
                    .to_vec(),
                negatives: ["blurry", "artifacts"].map(String::from).to_vec(),
            },
            objects: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredPrompt {
    pub schema: PromptSchema,
    pub sensor_context: String,
    /// Pose at prompt precision (0.01 mm, 0.1°).
    pub object_pose: ContactPose,
    pub long: Option<LongFields>,
}

pub fn sensor_context(m: SensorModality) -> String {
    format!("captured by a high-resolution vision-based tactile sensor {m}.")
}

fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_owned(),
        _ => s,
    }
}

fn pose_strings(p: &ContactPose) -> [String; 4] {
    [fixed(p.x, 2), fixed(p.y, 2), fixed(p.z, 2), fixed(p.yaw, 1)]
}

/// Round `p` onto the prompt grid, exactly as a JSON reader would see it.
pub fn quantize_pose(p: &ContactPose) -> ContactPose {
    let [x, y, z, yaw] = pose_strings(p).map(|s| s.parse::<f64>().expect("formatted float"));
    ContactPose::new(x, y, z, yaw)
}

pub fn make_prompt(
    m: SensorModality,
    p: &ContactPose,
    schema: PromptSchema,
    templates: &TemplateTable,
    object_id: &str,
) -> Result<StructuredPrompt> {
    let (p, _) = validate_pose(*p, ValidationMode::Strict)?;
    let (pose, _) = validate_pose(quantize_pose(&p), ValidationMode::Strict)?;
    Ok(StructuredPrompt {
        schema,
        sensor_context: sensor_context(m),
        object_pose: pose,
        long: match schema {
            PromptSchema::Short => None,
            PromptSchema::Long => Some(templates.lookup(object_id).clone()),
        },
    })
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

fn json_list(items: &[String]) -> String {
    let inner: Vec<String> = items.iter().map(|s| json_str(s)).collect();
    format!("[{}]", inner.join(", "))
}

impl StructuredPrompt {
    pub fn modality(&self) -> Result<SensorModality> {
        SensorModality::find_in(&self.sensor_context).ok_or(Error::ModalityNotFound)
    }

    /// Canonical serialization: fixed key order, 2-space indent, pose inline.
    pub fn to_json(&self) -> String {
        let [x, y, z, yaw] = pose_strings(&self.object_pose);
        let pose = format!(r#"{{"x": {x}, "y": {y}, "z": {z}, "yaw": {yaw}}}"#);
        let mut fields: Vec<(&str, String)> = Vec::new();
        if let Some(l) = &self.long {
            fields.push(("object_description", json_str(&l.object_description)));
            fields.push(("contact_description", json_str(&l.contact_description)));
            fields.push(("sensor_context", json_str(&self.sensor_context)));
            fields.push(("style_tags", json_list(&l.style_tags)));
            fields.push(("negatives", json_list(&l.negatives)));
        } else {
            fields.push(("sensor_context", json_str(&self.sensor_context)));
        }
        fields.push(("object_pose", pose));
        let body: Vec<String> = fields
            .into_iter()
            .map(|(k, v)| format!("  \"{k}\": {v}"))
            .collect();
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }
}

/// Parse a prompt JSON. With `strict`, keys outside the detected schema are
/// rejected; otherwise they are ignored.
pub fn parse_prompt(json: &[u8], strict: bool) -> Result<StructuredPrompt> {
    let value: Value =
        serde_json::from_slice(json).map_err(|e| Error::MalformedPrompt(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::MalformedPrompt("top level is not an object".into()))?;

    let has_long = LONG_KEYS
        .iter()
        .any(|k| !SHORT_KEYS.contains(k) && obj.contains_key(*k));
    let schema = if has_long {
        PromptSchema::Long
    } else {
        PromptSchema::Short
    };
    let expected: &[&str] = match schema {
        PromptSchema::Short => &SHORT_KEYS,
        PromptSchema::Long => &LONG_KEYS,
    };
    if strict {
        if let Some(extra) = obj.keys().find(|k| !expected.contains(&k.as_str())) {
            return Err(Error::SchemaMismatch(format!("unexpected key `{extra}`")));
        }
    }
    for k in expected {
        if !obj.contains_key(*k) {
            return Err(Error::MissingKey((*k).into()));
        }
    }

    let sensor_context = string_field(obj, "sensor_context")?;
    let pose_obj = obj["object_pose"]
        .as_object()
        .ok_or_else(|| Error::SchemaMismatch("object_pose is not an object".into()))?;
    if strict {
        if let Some(extra) = pose_obj.keys().find(|k| !POSE_KEYS.contains(&k.as_str())) {
            return Err(Error::SchemaMismatch(format!("unexpected key `object_pose.{extra}`")));
        }
    }
    let mut pose = [0.0; 4];
    for (slot, k) in pose.iter_mut().zip(POSE_KEYS) {
        *slot = pose_obj
            .get(k)
            .ok_or_else(|| Error::MissingKey(format!("object_pose.{k}")))?
            .as_f64()
            .ok_or_else(|| Error::SchemaMismatch(format!("object_pose.{k} is not a number")))?;
    }
    let (object_pose, _) = validate_pose(
        ContactPose::new(pose[0], pose[1], pose[2], pose[3]),
        ValidationMode::Strict,
    )?;

    let long = match schema {
        PromptSchema::Short => None,
        PromptSchema::Long => Some(LongFields {
            object_description: string_field(obj, "object_description")?,
            contact_description: string_field(obj, "contact_description")?,
            style_tags: list_field(obj, "style_tags")?,
            negatives: list_field(obj, "negatives")?,
        }),
    };
    let prompt = StructuredPrompt {
        schema,
        sensor_context,
        object_pose,
        long,
    };
    prompt.modality()?;
    Ok(prompt)
}

fn string_field(obj: &Map<String, Value>, key: &str) -> Result<String> {
    obj[key]
        .as_str()
        .map(String::from)
        .ok_or_else(|| Error::SchemaMismatch(format!("{key} is not a string")))
}

fn list_field(obj: &Map<String, Value>, key: &str) -> Result<Vec<String>> {
    let items = obj[key]
        .as_array()
        .ok_or_else(|| Error::SchemaMismatch(format!("{key} is not a list")))?;
    items
        .iter()
        .map(|v| {
            v.as_str()
                .map(String::from)
                .ok_or_else(|| Error::SchemaMismatch(format!("{key} holds a non-string")))
        })
        .collect()
}

/// One-hot modality (TacTip, ViTac, ViTacTip), pose scaled by (5, 5, 1, 90),
/// and a long-schema flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEmbedding(pub [f64; 8]);

pub const EMBED_DIM: usize = 8;
const POSE_SCALE: [f64; 4] = [5.0, 5.0, 1.0, 90.0];
const POSE_GRID: [f64; 4] = [100.0, 100.0, 100.0, 10.0];

impl ConditionEmbedding {
    pub fn new(m: SensorModality, p: &ContactPose, schema: PromptSchema) -> Self {
        let mut e = [0.0; 8];
        e[m.index()] = 1.0;
        let pose = [p.x, p.y, p.z, p.yaw];
        for k in 0..4 {
            e[3 + k] = pose[k] / POSE_SCALE[k];
        }
        e[7] = (schema == PromptSchema::Long) as u8 as f64;
        Self(e)
    }

    pub fn modality(&self) -> SensorModality {
        let mut best = 0;
        for k in 1..3 {
            if self.0[k] > self.0[best] {
                best = k;
            }
        }
        SensorModality::ALL[best]
    }

    /// Denormalized pose snapped to the prompt grid.
    pub fn pose(&self) -> ContactPose {
        let mut p = [0.0; 4];
        for k in 0..4 {
            let v = self.0[3 + k] * POSE_SCALE[k];
            p[k] = round(v * POSE_GRID[k]) / POSE_GRID[k] + 0.0;
        }
        ContactPose::new(p[0], p[1], p[2], p[3])
    }

    pub fn to_f32(&self) -> [f32; 8] {
        self.0.map(|v| v as f32)
    }
}

pub fn embed_prompt(sp: &StructuredPrompt) -> Result<ConditionEmbedding> {
    Ok(ConditionEmbedding::new(sp.modality()?, &sp.object_pose, sp.schema))
}
