//! Reading structured inputs back out of rendered prompts.

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::model::{AgentSpec, Flaw, FlawTarget, Position, WorkflowStep};
use crate::record::{from_record, Record};

/// Text between the first line `<tag>` and the next line `</tag>`.
pub fn section<'a>(prompt: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut offset = 0;
    let mut start = None;
    for line in prompt.split_inclusive('\n') {
        let end = offset + line.len();
        match start {
            None if line.trim() == open => start = Some(end),
            Some(s) if line.trim() == close => return Some(&prompt[s..offset]),
            _ => {}
        }
        offset = end;
    }
    None
}

pub fn record<T: Record>(prompt: &str, tag: &str) -> Option<T> {
    from_record(section(prompt, tag)?.trim()).ok()
}

pub fn json<T: DeserializeOwned>(prompt: &str, tag: &str) -> Option<T> {
    serde_json::from_str(section(prompt, tag)?.trim()).ok()
}

/// The team of a position-update prompt, rebuilt from its roles and workflow.
pub fn roles_and_workflow(prompt: &str) -> Option<Position> {
    let agents: Vec<AgentSpec> = json(prompt, "roles")?;
    let workflow: Vec<WorkflowStep> = json(prompt, "workflow")?;
    Some(Position::new(agents, workflow))
}

/// Wire form of a team.
pub fn team_json(pos: &Position) -> Value {
    json!({
        "roles": pos.agents.iter().map(|a| json!({
            "name": a.name, "responsibility": a.responsibility, "policy": a.policy
        })).collect::<Vec<_>>(),
        "workflow": pos.workflow.iter().map(|s| json!({
            "step": s.index, "role": s.role, "inputs": s.inputs, "output": s.output
        })).collect::<Vec<_>>(),
    })
}

/// Wire form of a flaw.
pub fn flaw_json(f: &Flaw) -> Value {
    let mut v = json!({ "category": f.category.label(), "explanation": f.explanation });
    let obj = v.as_object_mut().expect("object");
    match &f.target {
        FlawTarget::Role(name) => {
            obj.insert("role".into(), json!(name));
        }
        FlawTarget::Step { index, role } => {
            obj.insert("step".into(), json!(index));
            if let Some(r) = role {
                obj.insert("role".into(), json!(r));
            }
        }
        FlawTarget::Gap(a, b) => {
            obj.insert("between".into(), json!([a, b]));
        }
    }
    v
}

/// `value` as a fenced JSON answer with a line of reasoning before it.
pub fn fenced(value: &Value) -> String {
    format!(
        "Reasoning omitted.\n\n```json\n{}\n```\n",
        serde_json::to_string_pretty(value).expect("json")
    )
}
