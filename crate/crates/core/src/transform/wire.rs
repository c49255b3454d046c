//! Extraction of the structured block from a completion and lenient mapping of
//! its fields onto model types. Key matching ignores case, spaces, `_` and `-`.

use serde_json::{Map, Value};

use crate::model::{
    AdjustmentOp, AgentSpec, Flaw, FlawCategory, FlawTarget, Position, WorkflowStep,
};

/// Finds the JSON value in a completion: the last ```json fence, else the last
/// fence of any kind, else the whole text, else the outermost `{...}` span.
pub fn extract_json(text: &str) -> Result<Value, String> {
    let fences = fenced_blocks(text);
    let tagged: Vec<&(String, String)> = fences.iter().filter(|(lang, _)| lang == "json").collect();
    if let Some((_, body)) = tagged.last() {
        return serde_json::from_str(body)
            .map_err(|e| format!("the ```json block is not valid JSON: {e}"));
    }
    for (_, body) in fences.iter().rev() {
        if let Ok(v) = serde_json::from_str::<Value>(body) {
            return Ok(v);
        }
    }
    if let Ok(v) = serde_json::from_str::<Value>(text.trim()) {
        return Ok(v);
    }
    if let (Some(a), Some(b)) = (text.find('{'), text.rfind('}')) {
        if a < b {
            if let Ok(v) = serde_json::from_str::<Value>(&text[a..=b]) {
                return Ok(v);
            }
        }
    }
    Err("no ```json block found in the response".to_string())
}

fn fenced_blocks(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let t = line.trim_start();
        if let Some(lang) = t.strip_prefix("```") {
            let lang = lang.trim().to_ascii_lowercase();
            let mut body = String::new();
            for inner in lines.by_ref() {
                if inner.trim_start().starts_with("```") {
                    break;
                }
                body.push_str(inner);
                body.push('\n');
            }
            out.push((lang, body));
        }
    }
    out
}

fn norm_key(k: &str) -> String {
    k.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Looks up the first of `keys` present in `obj`.
pub fn get<'a>(obj: &'a Map<String, Value>, keys: &[&str]) -> Option<&'a Value> {
    let wanted: Vec<String> = keys.iter().map(|k| norm_key(k)).collect();
    wanted
        .iter()
        .find_map(|w| obj.iter().find(|(k, _)| &norm_key(k) == w).map(|(_, v)| v))
}

pub fn as_object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>, String> {
    v.as_object()
        .ok_or_else(|| format!("{what} must be a JSON object"))
}

/// The list under one of `keys`, or `v` itself when it is already a list.
pub fn list<'a>(v: &'a Value, keys: &[&str], what: &str) -> Result<&'a Vec<Value>, String> {
    if let Some(a) = v.as_array() {
        return Ok(a);
    }
    let obj = as_object(v, what)?;
    get(obj, keys)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("{what} needs a \"{}\" list", keys[0]))
}

pub fn text(obj: &Map<String, Value>, keys: &[&str], what: &str) -> Result<String, String> {
    match get(obj, keys) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(_) => Err(format!("{what}: \"{}\" must be text", keys[0])),
        None => Err(format!("{what}: missing \"{}\"", keys[0])),
    }
}

/// Optional text where null, "" and "None" all mean absent.
pub fn optional_text(obj: &Map<String, Value>, keys: &[&str]) -> Option<String> {
    match get(obj, keys)? {
        Value::String(s) => {
            let t = s.trim();
            let t = t.trim_matches(|c| c == '\'' || c == '"');
            if t.is_empty() || t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("null") {
                None
            } else {
                Some(s.trim().to_string())
            }
        }
        _ => None,
    }
}

/// A step number given as a number or numeric text ("3", "Step 3").
pub fn index(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|u| u as usize),
        Value::String(s) => match all_numbers(s).as_slice() {
            [n] => Some(*n),
            _ => None,
        },
        _ => None,
    }
}

pub fn index_field(obj: &Map<String, Value>, keys: &[&str], what: &str) -> Result<usize, String> {
    get(obj, keys)
        .and_then(index)
        .ok_or_else(|| format!("{what}: \"{}\" must be a step number", keys[0]))
}

/// A list of step numbers: a JSON list, or text such as "1, 2" or "none".
pub fn index_list(v: Option<&Value>, what: &str) -> Result<Vec<usize>, String> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| index(i).ok_or_else(|| format!("{what}: {i} is not a step number")))
            .collect(),
        Some(Value::Number(_)) => Ok(vec![
            index(v.unwrap()).ok_or_else(|| format!("{what}: bad step number"))?
        ]),
        Some(Value::String(s)) => Ok(all_numbers(s)),
        Some(other) => Err(format!("{what}: {other} is not a list of step numbers")),
    }
}

fn all_numbers(s: &str) -> Vec<usize> {
    s.split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse().ok())
        .collect()
}

/// Numbers written as "step N" (any case), in order of appearance.
pub fn step_numbers(s: &str) -> Vec<usize> {
    let lower = s.to_lowercase();
    let mut out = Vec::new();
    let mut rest = lower.as_str();
    while let Some(at) = rest.find("step") {
        rest = &rest[at + 4..];
        let tail = rest.trim_start_matches(['s', ' ', '#']);
        let digits: String = tail.chars().take_while(char::is_ascii_digit).collect();
        if let Ok(n) = digits.parse() {
            out.push(n);
        }
    }
    out
}

pub fn agent(v: &Value) -> Result<AgentSpec, String> {
    let obj = as_object(v, "role")?;
    Ok(AgentSpec::new(
        text(obj, &["name", "role", "title"], "role")?,
        text(obj, &["responsibility", "responsibilities"], "role")?,
        text(obj, &["policy", "policies"], "role")?,
    ))
}

pub fn step(v: &Value, default_index: Option<usize>) -> Result<WorkflowStep, String> {
    let obj = as_object(v, "workflow step")?;
    let index = match get(obj, &["index", "step", "number", "position"]).and_then(index) {
        Some(i) => i,
        None => default_index.ok_or("workflow step: missing \"step\" number")?,
    };
    Ok(WorkflowStep::new(
        index,
        text(obj, &["role", "agent"], "workflow step")?,
        index_list(get(obj, &["inputs", "input"]), "workflow step inputs")?,
        text(obj, &["output", "outputs"], "workflow step")?,
    ))
}

/// A team: `{"roles": [...], "workflow": [...]}`, possibly wrapped in `team`.
pub fn team(v: &Value) -> Result<Position, String> {
    let obj = as_object(v, "team")?;
    if let Some(inner) = get(obj, &["team"]) {
        if inner.is_object() {
            return team(inner);
        }
    }
    let roles = get(obj, &["roles", "agents"])
        .and_then(Value::as_array)
        .ok_or("team needs a \"roles\" list")?;
    let steps = get(obj, &["workflow", "steps"])
        .and_then(Value::as_array)
        .ok_or("team needs a \"workflow\" list")?;
    let agents = roles.iter().map(agent).collect::<Result<Vec<_>, _>>()?;
    let workflow = steps
        .iter()
        .enumerate()
        .map(|(i, s)| step(s, Some(i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Position::new(agents, workflow))
}

fn op_name(s: &str) -> String {
    norm_key(s)
}

/// One adjustment operation. Role and step payloads may be nested or inline.
pub fn op(v: &Value) -> Result<AdjustmentOp, String> {
    let obj = as_object(v, "operation")?;
    let kind = get(obj, &["op", "operation", "type", "kind"])
        .and_then(Value::as_str)
        .ok_or("operation needs an \"op\" name")?;
    let role_name = || text(obj, &["name", "role"], "operation");
    let step_no = || index_field(obj, &["step", "index"], "operation");
    Ok(match op_name(kind).as_str() {
        "addrole" => AdjustmentOp::AddRole {
            role: match get(obj, &["role"]) {
                Some(r @ Value::Object(_)) => agent(r)?,
                _ => agent(v)?,
            },
        },
        "modifyrole" | "updaterole" => AdjustmentOp::ModifyRole {
            name: role_name()?,
            policy: text(obj, &["policy", "newpolicy"], "operation")?,
        },
        "deleterole" | "removerole" => AdjustmentOp::DeleteRole { name: role_name()? },
        "addstep" | "insertstep" => AdjustmentOp::AddStep {
            step: match get(obj, &["step"]) {
                Some(s @ Value::Object(_)) => step(s, None)?,
                _ => step(v, None)?,
            },
        },
        "modifyinput" | "modifyinputs" => AdjustmentOp::ModifyInput {
            step: step_no()?,
            inputs: index_list(get(obj, &["inputs", "input"]), "operation inputs")?,
        },
        "modifyoutput" => AdjustmentOp::ModifyOutput {
            step: step_no()?,
            output: text(obj, &["output"], "operation")?,
        },
        "deletestep" | "removestep" => AdjustmentOp::DeleteStep { step: step_no()? },
        "reordersteps" | "reorder" => AdjustmentOp::ReorderSteps {
            order: index_list(get(obj, &["order", "steps"]), "re-order")?,
        },
        _ => return Err(format!("unknown operation `{kind}`")),
    })
}

/// Why a flaw item could not be used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlawIssue {
    Malformed(String),
    UnknownCategory(String),
    Unresolved(String),
}

/// A flaw from a JSON object or a "Category: details" line, resolved against `pos`.
pub fn flaw(v: &Value, pos: &Position) -> Result<Flaw, FlawIssue> {
    let parsed = match v {
        Value::String(s) => flaw_from_line(s, pos)?,
        Value::Object(obj) => flaw_from_object(obj, pos)?,
        other => {
            return Err(FlawIssue::Malformed(format!(
                "flaw {other} is neither an object nor text"
            )))
        }
    };
    match parsed.unresolved_reason(pos) {
        Some(reason) => Err(FlawIssue::Unresolved(reason)),
        None => Ok(parsed),
    }
}

fn category(raw: &str) -> Result<FlawCategory, FlawIssue> {
    raw.parse()
        .map_err(|_| FlawIssue::UnknownCategory(raw.trim().to_string()))
}

fn flaw_from_object(obj: &Map<String, Value>, pos: &Position) -> Result<Flaw, FlawIssue> {
    let raw = text(obj, &["category", "type", "flawtype", "flaw"], "flaw")
        .map_err(FlawIssue::Malformed)?;
    let cat = category(&raw)?;
    let explanation = optional_text(obj, &["explanation", "description", "reason", "details"])
        .unwrap_or_default();
    let role = optional_text(obj, &["role", "name", "target"]);
    let target = if cat.is_role_category() {
        FlawTarget::Role(
            role.ok_or_else(|| FlawIssue::Malformed(format!("{cat} needs a \"role\"")))?,
        )
    } else if cat == FlawCategory::MissingWorkflowStep {
        let between = match get(obj, &["between", "gap", "after"]) {
            Some(Value::Array(items)) => items.iter().filter_map(index).collect(),
            Some(Value::String(s)) => all_numbers(s),
            Some(n @ Value::Number(_)) => index(n).into_iter().collect(),
            _ => Vec::new(),
        };
        match between.as_slice() {
            [a] => FlawTarget::Gap(*a, a + 1),
            [a, b] => FlawTarget::Gap(*a, *b),
            _ => {
                return Err(FlawIssue::Malformed(format!(
                    "{cat} needs \"between\": two adjacent step numbers"
                )))
            }
        }
    } else {
        let index = get(obj, &["step", "index"])
            .and_then(index)
            .ok_or_else(|| FlawIssue::Malformed(format!("{cat} needs a \"step\" number")))?;
        FlawTarget::Step {
            index,
            role: role.or_else(|| pos.step(index).map(|s| s.role.clone())),
        }
    };
    Ok(Flaw {
        category: cat,
        target,
        explanation,
    })
}

/// Longest team role name mentioned in `text`.
fn mentioned_role(text: &str, pos: &Position) -> Option<String> {
    pos.agents
        .iter()
        .filter(|a| text.contains(&a.name))
        .max_by_key(|a| a.name.len())
        .map(|a| a.name.clone())
}

fn first_quoted(text: &str) -> Option<String> {
    for (open, close) in [('"', '"'), ('“', '”'), ('\'', '\'')] {
        if let Some(a) = text.find(open) {
            let rest = &text[a + open.len_utf8()..];
            if let Some(b) = rest.find(close) {
                let q = rest[..b].trim();
                if !q.is_empty() {
                    return Some(q.to_string());
                }
            }
        }
    }
    None
}

/// Parses the prose form "Role Policy Deficiency: Quality Assurance Specialist ...".
pub fn flaw_from_line(line: &str, pos: &Position) -> Result<Flaw, FlawIssue> {
    let line = line.trim().trim_start_matches(|c: char| {
        c == '-' || c == '*' || c.is_ascii_digit() || c == '.' || c == ' '
    });
    let (raw, rest) = line.split_once(':').ok_or_else(|| {
        FlawIssue::Malformed(format!("`{line}` is not of the form `Category: details`"))
    })?;
    let cat = category(raw.trim_matches('*'))?;
    let rest = rest.trim().trim_start_matches('*').trim();
    let explanation = rest.to_string();
    let target = if cat.is_role_category() {
        let name = match cat {
            FlawCategory::MissingRole => first_quoted(rest).or_else(|| mentioned_role(rest, pos)),
            _ => mentioned_role(rest, pos),
        };
        FlawTarget::Role(
            name.ok_or_else(|| FlawIssue::Unresolved(format!("no role named in `{rest}`")))?,
        )
    } else if cat == FlawCategory::MissingWorkflowStep {
        match step_numbers(rest).as_slice() {
            [a, b, ..] => FlawTarget::Gap(*a, *b),
            [a] => FlawTarget::Gap(*a, a + 1),
            [] => return Err(FlawIssue::Unresolved(format!("no steps named in `{rest}`"))),
        }
    } else {
        let index = *step_numbers(rest)
            .first()
            .ok_or_else(|| FlawIssue::Unresolved(format!("no step named in `{rest}`")))?;
        FlawTarget::Step {
            index,
            role: mentioned_role(rest, pos).or_else(|| pos.step(index).map(|s| s.role.clone())),
        }
    };
    Ok(Flaw {
        category: cat,
        target,
        explanation,
    })
}

/// Lines of a prose answer that look like flaws ("<Category>: ...").
pub fn prose_flaw_lines(text: &str) -> Vec<&str> {
    text.lines()
        .filter(|l| {
            let t = l.trim().trim_start_matches(|c: char| {
                c == '-' || c == '*' || c.is_ascii_digit() || c == '.' || c == ' '
            });
            t.split_once(':')
                .is_some_and(|(c, _)| c.trim_matches('*').parse::<FlawCategory>().is_ok())
        })
        .collect()
}
