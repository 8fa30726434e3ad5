//! Neutral scene-graph input and its rendering into a textual video script.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGraph {
    pub video_id: String,
    pub activity: Activity,
    pub actors: Vec<Actor>,
    pub sub_activities: Vec<SubActivity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Activity {
    pub title: String,
    /// `[start, end]` in seconds.
    pub span: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Actor {
    pub id: String,
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubActivity {
    pub span: [f64; 2],
    pub description: String,
    pub actor_ids: Vec<String>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub relation_changes: Vec<RelationChange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Attribute,
    Transitive,
    Intransitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub kind: EventKind,
    /// Actor id.
    pub subject: String,
    pub predicate: String,
    /// Actor id for transitive events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
}

/// An object's relation to an actor switching state at `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationChange {
    pub entity: String,
    #[serde(default)]
    pub from: Option<String>,
    #[serde(default)]
    pub to: Option<String>,
    pub time: f64,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> PipelineError {
    PipelineError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn check_span(path: &str, span: [f64; 2]) -> Result<(), PipelineError> {
    let [s, e] = span;
    if !(s.is_finite() && e.is_finite()) || s < 0.0 {
        return Err(schema(path, "times must be finite non-negative seconds"));
    }
    if e < s {
        return Err(schema(path, "span ends before it starts"));
    }
    Ok(())
}

impl SceneGraph {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))
    }

    /// Checks spans and actor references; returns the id → class map.
    pub fn validate(&self) -> Result<BTreeMap<&str, &str>, PipelineError> {
        if self.video_id.trim().is_empty() {
            return Err(schema("video_id", "empty"));
        }
        check_span("activity.span", self.activity.span)?;
        let mut classes: BTreeMap<&str, &str> = BTreeMap::new();
        for (i, a) in self.actors.iter().enumerate() {
            if a.id.is_empty() || a.class.is_empty() {
                return Err(schema(format!("actors[{i}]"), "empty id or class"));
            }
            match classes.get(a.id.as_str()) {
                Some(&c) if c != a.class => {
                    return Err(PipelineError::InconsistentActorId {
                        video_id: self.video_id.clone(),
                        actor_id: a.id.clone(),
                        classes: vec![c.to_string(), a.class.clone()],
                    })
                }
                _ => {
                    classes.insert(&a.id, &a.class);
                }
            }
        }
        let [lo, hi] = self.activity.span;
        for (i, sub) in self.sub_activities.iter().enumerate() {
            let p = format!("sub_activities[{i}]");
            check_span(&format!("{p}.span"), sub.span)?;
            if sub.span[0] < lo || sub.span[1] > hi {
                return Err(schema(format!("{p}.span"), "outside the activity span"));
            }
            let resolve = |path: String, id: &str| {
                if classes.contains_key(id) {
                    Ok(())
                } else {
                    Err(schema(path, format!("unknown actor id `{id}`")))
                }
            };
            for (j, id) in sub.actor_ids.iter().enumerate() {
                resolve(format!("{p}.actor_ids[{j}]"), id)?;
            }
            for (j, ev) in sub.events.iter().enumerate() {
                resolve(format!("{p}.events[{j}].subject"), &ev.subject)?;
                match (ev.kind, &ev.object) {
                    (EventKind::Transitive, Some(o)) => resolve(format!("{p}.events[{j}].object"), o)?,
                    (EventKind::Transitive, None) => {
                        return Err(schema(format!("{p}.events[{j}].object"), "transitive event needs an object"))
                    }
                    (_, Some(_)) => {
                        return Err(schema(format!("{p}.events[{j}].object"), "only transitive events take an object"))
                    }
                    (_, None) => {}
                }
            }
            for (j, rc) in sub.relation_changes.iter().enumerate() {
                if !(rc.time.is_finite() && rc.time >= 0.0) {
                    return Err(schema(format!("{p}.relation_changes[{j}].time"), "not a non-negative time"));
                }
            }
        }
        Ok(classes)
    }
}

/// Seconds without a trailing `.0` when integral.
pub fn format_time(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format!("{t}")
    }
}

fn state(s: &Option<String>) -> String {
    match s {
        Some(s) => format!("\"{s}\""),
        None => "nothing".to_string(),
    }
}

/// Hierarchical plain-text script: activity header, the actor list with
/// visual descriptions, then one section per sub-activity.
pub fn render_script(graph: &SceneGraph) -> Result<String, PipelineError> {
    let classes = graph.validate()?;
    let mut out = String::new();
    let [s, e] = graph.activity.span;
    let _ = writeln!(
        out,
        "# Activity: \"{}\" ({}-{})",
        graph.activity.title,
        format_time(s),
        format_time(e)
    );
    out.push_str("All actors:\n");
    let mut listed = std::collections::BTreeSet::new();
    for a in &graph.actors {
        if !listed.insert(a.id.as_str()) {
            continue;
        }
        match a.description.as_deref().filter(|d| !d.trim().is_empty()) {
            Some(d) => {
                let _ = writeln!(out, "- ROLE: {}. Visual description: {}", a.class, d.trim());
            }
            None => {
                let _ = writeln!(out, "- ROLE: {}.", a.class);
            }
        }
    }
    for sub in &graph.sub_activities {
        let [s, e] = sub.span;
        let _ = writeln!(
            out,
            "\n## Sub activity ({}-{}): {}",
            format_time(s),
            format_time(e),
            sub.description
        );
        let present: Vec<&str> = sub.actor_ids.iter().map(|id| classes[id.as_str()]).collect();
        let _ = writeln!(out, "- Actors present: {}", present.join(", "));
        if !sub.events.is_empty() {
            out.push_str("- Happened during sub-activity:\n");
            for ev in &sub.events {
                let subject = classes[ev.subject.as_str()];
                let line = match ev.kind {
                    EventKind::Attribute => format!("(attribute) {subject} {}", ev.predicate),
                    EventKind::Intransitive => format!("(intransitive action) {subject} {}", ev.predicate),
                    EventKind::Transitive => format!(
                        "(transitive action) {subject} {} {}",
                        ev.predicate,
                        classes[ev.object.as_deref().unwrap_or_default()]
                    ),
                };
                let _ = writeln!(out, "    - {line}");
            }
        }
        if !sub.relation_changes.is_empty() {
            out.push_str("- Relation changes:\n");
            for rc in &sub.relation_changes {
                let _ = writeln!(
                    out,
                    "    - {} goes from {} to {} at {}",
                    rc.entity,
                    state(&rc.from),
                    state(&rc.to),
                    format_time(rc.time)
                );
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dining() -> SceneGraph {
        serde_json::from_value(serde_json::json!({
            "video_id": "v1",
            "activity": {"title": "Dining", "span": [0, 597]},
            "actors": [
                {"id": "a1", "class": "customer", "description": "The person with a white shirt"},
                {"id": "a2", "class": "waiter", "description": "The person in a black apron"}
            ],
            "sub_activities": [{
                "span": [0, 10],
                "description": "The waiter is talking to the customer or helping them into their seat",
                "actor_ids": ["a1", "a2"],
                "events": [
                    {"kind": "attribute", "subject": "a2", "predicate": "standing"},
                    {"kind": "transitive", "subject": "a2", "predicate": "talking to", "object": "a1"},
                    {"kind": "intransitive", "subject": "a2", "predicate": "bending"}
                ],
                "relation_changes": [{"entity": "bag", "from": "holding", "to": "touching", "time": 18.5}]
            }]
        }))
        .unwrap()
    }

    #[test]
    fn dining_layout() {
        let text = render_script(&dining()).unwrap();
        assert!(text.starts_with("# Activity: \"Dining\" (0-597)\nAll actors:\n"));
        assert!(text.contains("## Sub activity (0-10): The waiter is talking"));
        assert!(text.contains("- Actors present: customer, waiter\n"));
        assert!(text.contains("    - (attribute) waiter standing\n"));
        assert!(text.contains("    - (transitive action) waiter talking to customer\n"));
        assert!(text.contains("    - (intransitive action) waiter bending\n"));
        assert!(text.contains("bag goes from \"holding\" to \"touching\" at 18.5"));
        assert_eq!(text.matches("## Sub activity").count(), 1);
        assert_eq!(render_script(&dining()).unwrap(), text);
    }

    #[test]
    fn spans_and_ids_are_checked() {
        let mut g = dining();
        g.sub_activities[0].span = [5.0, 600.0];
        assert!(matches!(
            render_script(&g),
            Err(PipelineError::Schema { path, .. }) if path == "sub_activities[0].span"
        ));
        let mut g = dining();
        g.sub_activities[0].events[1].object = Some("a9".into());
        assert!(matches!(
            render_script(&g),
            Err(PipelineError::Schema { path, .. }) if path == "sub_activities[0].events[1].object"
        ));
        let mut g = dining();
        g.activity.span = [-1.0, 5.0];
        assert!(render_script(&g).is_err());
    }

    #[test]
    fn colliding_actor_ids() {
        let mut g = dining();
        g.actors.push(Actor {
            id: "a1".into(),
            class: "chef".into(),
            description: None,
        });
        assert!(matches!(
            render_script(&g),
            Err(PipelineError::InconsistentActorId { actor_id, .. }) if actor_id == "a1"
        ));
        // a repeated id with the same class is one actor
        let mut g = dining();
        g.actors.push(g.actors[0].clone());
        assert_eq!(render_script(&g).unwrap(), render_script(&dining()).unwrap());
    }

    #[test]
    fn time_format() {
        assert_eq!(format_time(597.0), "597");
        assert_eq!(format_time(18.25), "18.25");
    }
}
