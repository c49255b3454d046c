//! Prompt templates with named `{placeholder}` slots.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// The prompt-backed operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    InitTeam,
    Eval,
    Flaw,
    InitVel,
    IdentifyFail,
    Fail,
    Pers,
    Glob,
    Vel,
    Pos,
    WriteForward,
    Role,
}

impl Operator {
    pub const ALL: [Operator; 12] = [
        Operator::InitTeam,
        Operator::Eval,
        Operator::Flaw,
        Operator::InitVel,
        Operator::IdentifyFail,
        Operator::Fail,
        Operator::Pers,
        Operator::Glob,
        Operator::Vel,
        Operator::Pos,
        Operator::WriteForward,
        Operator::Role,
    ];

    /// Template file stem, also used as the call-tag prefix (except `Role`,
    /// whose calls are tagged `exec`).
    pub fn name(self) -> &'static str {
        match self {
            Operator::InitTeam => "init_team",
            Operator::Eval => "eval",
            Operator::Flaw => "flaw",
            Operator::InitVel => "init_vel",
            Operator::IdentifyFail => "identify_fail",
            Operator::Fail => "fail",
            Operator::Pers => "pers",
            Operator::Glob => "glob",
            Operator::Vel => "vel",
            Operator::Pos => "pos",
            Operator::WriteForward => "write_forward",
            Operator::Role => "role",
        }
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            Operator::InitTeam => &["task"],
            Operator::Eval => &["task", "workflow", "evaluation"],
            Operator::Flaw => &["feedback", "current team"],
            Operator::InitVel => &["current_team", "feedback"],
            Operator::IdentifyFail => &["feedback", "velocity"],
            Operator::Fail => &["team", "feedback"],
            Operator::Pers => &["current_team", "task", "feedback", "p_best"],
            Operator::Glob => &["current_team", "task", "feedback", "g_best"],
            Operator::Vel => &["team", "task", "feedback"],
            Operator::Pos => &["roles", "workflow", "task", "plan"],
            Operator::WriteForward => &["function description", "roles", "workflow", "examples"],
            Operator::Role => &[
                "name",
                "instance",
                "information",
                "responsibility",
                "policy",
                "output",
            ],
        }
    }

    fn emits_ops(self) -> bool {
        matches!(
            self,
            Operator::InitVel | Operator::Fail | Operator::Pers | Operator::Glob | Operator::Vel
        )
    }

    fn builtin_body(self) -> &'static str {
        match self {
            Operator::InitTeam => include_str!("../../prompts/init_team.txt"),
            Operator::Eval => include_str!("../../prompts/eval.txt"),
            Operator::Flaw => include_str!("../../prompts/flaw.txt"),
            Operator::InitVel => include_str!("../../prompts/init_vel.txt"),
            Operator::IdentifyFail => include_str!("../../prompts/identify_fail.txt"),
            Operator::Fail => include_str!("../../prompts/fail.txt"),
            Operator::Pers => include_str!("../../prompts/pers.txt"),
            Operator::Glob => include_str!("../../prompts/glob.txt"),
            Operator::Vel => include_str!("../../prompts/vel.txt"),
            Operator::Pos => include_str!("../../prompts/pos.txt"),
            Operator::WriteForward => include_str!("../../prompts/write_forward.txt"),
            Operator::Role => include_str!("../../prompts/role.txt"),
        }
    }

    fn builtin_format(self) -> &'static str {
        match self {
            Operator::InitTeam => include_str!("../../prompts/format/init_team.txt"),
            Operator::Eval => include_str!("../../prompts/format/eval.txt"),
            Operator::Flaw => include_str!("../../prompts/format/flaw.txt"),
            Operator::InitVel => include_str!("../../prompts/format/init_vel.txt"),
            Operator::IdentifyFail => include_str!("../../prompts/format/identify_fail.txt"),
            Operator::Fail => include_str!("../../prompts/format/fail.txt"),
            Operator::Pers => include_str!("../../prompts/format/pers.txt"),
            Operator::Glob => include_str!("../../prompts/format/glob.txt"),
            Operator::Vel => include_str!("../../prompts/format/vel.txt"),
            Operator::Pos => include_str!("../../prompts/format/pos.txt"),
            Operator::WriteForward => include_str!("../../prompts/format/write_forward.txt"),
            Operator::Role => "",
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template `{template}` lacks placeholder {{{placeholder}}}")]
    MissingPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("no binding for placeholder {{{placeholder}}} of template `{template}`")]
    MissingBinding {
        template: String,
        placeholder: String,
    },
    #[error("could not read template `{path}`: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub required_placeholders: Vec<String>,
}

impl PromptTemplate {
    pub fn new(
        name: impl Into<String>,
        body: impl Into<String>,
        required: &[&str],
    ) -> Result<Self, PromptError> {
        let t = Self {
            name: name.into(),
            body: body.into(),
            required_placeholders: required.iter().map(|s| s.to_string()).collect(),
        };
        for p in &t.required_placeholders {
            if !t.body.contains(&format!("{{{p}}}")) {
                return Err(PromptError::MissingPlaceholder {
                    template: t.name.clone(),
                    placeholder: p.clone(),
                });
            }
        }
        Ok(t)
    }

    /// Substitutes every required placeholder in one left-to-right pass, so
    /// bound values are never themselves scanned for placeholders. Other brace
    /// text in the body is left as is.
    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, PromptError> {
        for p in &self.required_placeholders {
            if !bindings.contains_key(p.as_str()) {
                return Err(PromptError::MissingBinding {
                    template: self.name.clone(),
                    placeholder: p.clone(),
                });
            }
        }
        let mut out = String::with_capacity(
            self.body.len() + bindings.values().map(String::len).sum::<usize>(),
        );
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let tail = &rest[open..];
            let hit = self.required_placeholders.iter().find_map(|p| {
                let slot = format!("{{{p}}}");
                tail.starts_with(&slot)
                    .then(|| (slot.len(), &bindings[p.as_str()]))
            });
            match hit {
                Some((len, value)) => {
                    out.push_str(value);
                    rest = &tail[len..];
                }
                None => {
                    out.push('{');
                    rest = &tail[1..];
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// All templates: the verbatim operator prompts, their response-format
/// addenda, the shared operation reference and the repair prompt.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    bodies: BTreeMap<Operator, PromptTemplate>,
    formats: BTreeMap<Operator, String>,
    ops_reference: String,
    repair: PromptTemplate,
}

const REPAIR_PLACEHOLDERS: &[&str] = &["problem", "response", "request"];

impl PromptLibrary {
    pub fn builtin() -> Self {
        let bodies = Operator::ALL
            .into_iter()
            .map(|op| {
                let t = PromptTemplate::new(op.name(), op.builtin_body(), op.placeholders())
                    .expect("builtin templates carry their placeholders");
                (op, t)
            })
            .collect();
        let formats = Operator::ALL
            .into_iter()
            .map(|op| (op, op.builtin_format().to_string()))
            .collect();
        Self {
            bodies,
            formats,
            ops_reference: include_str!("../../prompts/format/ops.txt").to_string(),
            repair: PromptTemplate::new(
                "repair",
                include_str!("../../prompts/format/repair.txt"),
                REPAIR_PLACEHOLDERS,
            )
            .expect("builtin repair template"),
        }
    }

    /// Builtin templates overridden by any `<name>.txt` in `dir` and
    /// `format/<name>.txt` (including `format/ops.txt`, `format/repair.txt`).
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut lib = Self::builtin();
        let read = |path: &Path| -> Result<Option<String>, PromptError> {
            match std::fs::read_to_string(path) {
                Ok(s) => Ok(Some(s)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(PromptError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                }),
            }
        };
        for op in Operator::ALL {
            if let Some(body) = read(&dir.join(format!("{}.txt", op.name())))? {
                lib.bodies
                    .insert(op, PromptTemplate::new(op.name(), body, op.placeholders())?);
            }
            if let Some(fmt) = read(&dir.join("format").join(format!("{}.txt", op.name())))? {
                lib.formats.insert(op, fmt);
            }
        }
        if let Some(ops) = read(&dir.join("format/ops.txt"))? {
            lib.ops_reference = ops;
        }
        if let Some(repair) = read(&dir.join("format/repair.txt"))? {
            lib.repair = PromptTemplate::new("repair", repair, REPAIR_PLACEHOLDERS)?;
        }
        Ok(lib)
    }

    pub fn template(&self, op: Operator) -> &PromptTemplate {
        &self.bodies[&op]
    }

    /// The verbatim body rendered, followed by the response-format addendum.
    pub fn render(&self, op: Operator, bindings: &[(&str, String)]) -> Result<String, PromptError> {
        let map: BTreeMap<&str, String> = bindings.iter().cloned().collect();
        let mut text = self.bodies[&op].render(&map)?;
        let format = &self.formats[&op];
        if !format.trim().is_empty() {
            text.push_str("\n\n");
            text.push_str(format.trim_end());
            text.push('\n');
        }
        if op.emits_ops() {
            text.push('\n');
            text.push_str(self.ops_reference.trim_end());
            text.push('\n');
        }
        Ok(text)
    }

    pub fn render_repair(&self, request: &str, response: &str, problem: &str) -> String {
        let map: BTreeMap<&str, String> = [
            ("problem", problem.to_string()),
            ("response", response.to_string()),
            ("request", request.to_string()),
        ]
        .into_iter()
        .collect();
        self.repair
            .render(&map)
            .expect("repair bindings are complete")
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}
