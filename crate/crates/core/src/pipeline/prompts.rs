//! Chat prompts sent to the generation clients. The wording is data.

use serde::{Deserialize, Serialize};

use crate::digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: text.into(),
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: text.into(),
        }
    }
}

pub type Prompt = Vec<ChatMessage>;

pub fn prompt_hash(prompt: &[ChatMessage]) -> String {
    digest::of_json(prompt)
}

pub const QUESTION_SYSTEM: [&str; 2] = [
    "You generate interesting questions to ask about the video for which the description is provided. Pretend you don't get the exact description (ie. no exact times or player ids) but you did watch the video, so you have a notion of what happens, and when.",
    "Return a list of Multiple Choice questions formated as a json with q, ans, dist1, dist2, dist3, dist4 keys. `distN` are 4 distractors, i.e. plausible but wrong answers.",
];

const QUESTION_USER: &str = "What are interesting questions to ask about this video? (description provided)
Return a numbered list of questions in json format with q, ans, dist1, dist2, dist3, dist4 keys, where distN are distractors.
Try to use visual descriptions of the actors instead of their role sometimes (eg. the person with the red shirt instead of the waiter).
**NEVER** say subactivities. Eg. don't say \"first subactivity\", instead say \"while the waiters served the drinks\".
<EXTRA>Video description:
---
<DESC>
---
Remember, **NEVER** say subactivities. Eg. don't say \"first subactivity\", instead say \"while the waiters served the drinks\".";

/// Extra instruction for sources whose actors may lack a role.
pub const UNCLASSIFIED_ACTORS_NOTE: &str = "Also avoid saying \"unclassified ...\" to refer to actors. If you weren't provided with a role use visual descriptions instead.\n";

pub fn question_prompt(script: &str, unclassified_note: bool) -> Prompt {
    let user = QUESTION_USER
        .replace("<EXTRA>", if unclassified_note { UNCLASSIFIED_ACTORS_NOTE } else { "" })
        .replace("<DESC>", script.trim_end());
    vec![
        ChatMessage::system(QUESTION_SYSTEM[0]),
        ChatMessage::system(QUESTION_SYSTEM[1]),
        ChatMessage::user(user),
    ]
}

pub const PROGRAM_SYSTEM: [&str; 2] = [
    "Only use the functions you have been provided with.",
    "Only complete the code. Don't include markdown syntax (eg. ticks).",
];

pub const PROGRAM_HEADER: &str = "def execute_command(video, possible_answers, question):\n    # Reason every step";

/// Condensed description of the perception API generated programs target.
pub const DEFAULT_API_SPEC: &str = r#"class ImagePatch:
    """A crop of an image with methods to query its content."""
    def find(self, object_name: str) -> list[ImagePatch]: ...
    def exists(self, object_name: str) -> bool: ...
    def verify_property(self, object_name: str, visual_property: str) -> bool: ...
    def simple_query(self, question: str) -> str: ...
    def best_text_match(self, option_list: list[str]) -> str: ...
    def compute_depth(self) -> float: ...
    def crop(self, left: int, lower: int, right: int, upper: int) -> ImagePatch: ...
    def overlaps_with(self, left: int, lower: int, right: int, upper: int) -> bool: ...

class VideoSegment:
    """A contiguous range of frames of a video."""
    def frame_iterator(self) -> Iterator[ImagePatch]: ...
    def frame_from_index(self, index: int) -> ImagePatch: ...
    def trim(self, start: int, end: int) -> VideoSegment: ...
    def select_answer(self, info: dict, question: str, possible_answers: list[str]) -> str: ...
    num_frames: int

def best_image_match(list_patches: list[ImagePatch], content: list[str]) -> ImagePatch: ...
def distance(patch_a: ImagePatch, patch_b: ImagePatch) -> float: ...
def bool_to_yesno(bool_answer: bool) -> str: ...
def llm_query(question: str) -> str: ...
"#;

pub fn program_prompt(api_spec: &str, question: &str, options: &[String]) -> Prompt {
    let quoted: Vec<String> = options.iter().map(|o| format!("{o:?}")).collect();
    let user = format!(
        "{}\n# {}\n# [{}]\n{}",
        api_spec.trim_end(),
        question,
        quoted.join(", "),
        PROGRAM_HEADER
    );
    vec![
        ChatMessage::system(PROGRAM_SYSTEM[0]),
        ChatMessage::system(PROGRAM_SYSTEM[1]),
        ChatMessage::user(user),
    ]
}

/// True when `prompt` asks for a program rather than for questions.
pub fn is_program_prompt(prompt: &[ChatMessage]) -> bool {
    prompt
        .last()
        .is_some_and(|m| m.content.trim_end().ends_with(PROGRAM_HEADER))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn question_prompt_embeds_script() {
        let p = question_prompt("# Activity: \"x\" (0-1)\n", false);
        assert_eq!(p.len(), 3);
        assert!(p[2].content.contains("---\n# Activity: \"x\" (0-1)\n---"));
        assert!(!p[2].content.contains("unclassified"));
        assert!(question_prompt("s", true)[2].content.contains("unclassified"));
        assert!(!is_program_prompt(&p));
    }

    #[test]
    fn program_prompt_layout() {
        let opts = vec!["a".to_string(), "b c".to_string()];
        let p = program_prompt("API", "what?", &opts);
        assert_eq!(
            p[2].content,
            "API\n# what?\n# [\"a\", \"b c\"]\ndef execute_command(video, possible_answers, question):\n    # Reason every step"
        );
        assert!(is_program_prompt(&p));
        assert_ne!(prompt_hash(&p), prompt_hash(&program_prompt("API", "what", &opts)));
    }
}
