//! Prompt templates.
//!
//! A template file is split into `[section]` blocks; lines starting with `#`
//! are comments. Required sections: `system`, `steps`, `constraints`,
//! `resume_step`, `resume_block`, `expert_step`, `expert_block`, `user`.
//! `steps` and `constraints` hold one item per line.
//!
//! Placeholders:
//! - `user`: `{steps}`, `{constraints}`, `{original_jd}`, `{matched_resumes}`
//! - `steps`: `{branch_step}` (once, as its own line)
//! - `resume_block`: `{resumes}`
//!
//! `{original_jd}` and `{matched_resumes}` must each appear exactly once.

use std::collections::BTreeMap;
use std::path::Path;

use crate::domain::CategoryVocab;
use crate::error::{Error, Result};

pub const DEFAULT_TEMPLATE: &str = include_str!("../../templates/prompt.tmpl");
pub const TEMPLATE_FILE: &str = "prompt.tmpl";

/// Default cap on reference resumes per prompt.
pub const MAX_RESUMES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub system: String,
    pub steps: Vec<String>,
    pub constraints: Vec<String>,
    pub resume_step: String,
    pub resume_block: String,
    pub expert_step: String,
    pub expert_block: String,
    pub user: String,
}

/// System and user messages of one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    /// Both messages as one text, as stored in the augmentation log.
    pub fn text(&self) -> String {
        format!("[system]\n{}\n[user]\n{}", self.system, self.user)
    }
}

const SECTIONS: [&str; 8] =
    ["system", "steps", "constraints", "resume_step", "resume_block", "expert_step", "expert_block", "user"];

fn placeholders(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if after[..close].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && close > 0 => {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

fn check_placeholders(section: &str, body: &str, allowed: &[&str], exactly_once: &[&str]) -> Result<()> {
    let found = placeholders(body);
    if let Some(bad) = found.iter().find(|p| !allowed.contains(p)) {
        return Err(Error::Augment(format!("template section [{section}] has unknown placeholder {{{bad}}}")));
    }
    for want in exactly_once {
        let n = found.iter().filter(|p| *p == want).count();
        if n != 1 {
            return Err(Error::Augment(format!(
                "template section [{section}] must contain {{{want}}} exactly once (found {n})"
            )));
        }
    }
    Ok(())
}

/// Replaces `{name}` tokens in one pass; substituted text is not rescanned.
fn render(body: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(body.len() + 256);
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| values.iter().find(|(k, _)| *k == &after[..close]).map(|(_, v)| (close, v)));
        match hit {
            Some((close, v)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

impl PromptTemplate {
    pub fn parse(source: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for line in source.lines() {
            if line.starts_with('#') {
                continue;
            }
            let t = line.trim();
            if t.starts_with('[') && t.ends_with(']') && SECTIONS.contains(&&t[1..t.len() - 1]) {
                let name = t[1..t.len() - 1].to_string();
                if sections.contains_key(&name) {
                    return Err(Error::Augment(format!("template section [{name}] appears twice")));
                }
                sections.insert(name.clone(), Vec::new());
                current = Some(name);
                continue;
            }
            match &current {
                Some(name) => sections.get_mut(name).expect("inserted").push(line),
                None if t.is_empty() => {}
                None => return Err(Error::Augment(format!("template text outside a section: `{t}`"))),
            }
        }
        let mut take = |name: &str| -> Result<String> {
            let lines = sections.remove(name).ok_or_else(|| Error::Augment(format!("template is missing section [{name}]")))?;
            Ok(lines.join("\n").trim().to_string())
        };
        let list = |s: String| s.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect::<Vec<_>>();
        let t = PromptTemplate {
            system: take("system")?,
            steps: list(take("steps")?),
            constraints: list(take("constraints")?),
            resume_step: take("resume_step")?,
            resume_block: take("resume_block")?,
            expert_step: take("expert_step")?,
            expert_block: take("expert_block")?,
            user: take("user")?,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_placeholders("user", &self.user, &["steps", "constraints", "original_jd", "matched_resumes"], &[
            "original_jd",
            "matched_resumes",
        ])?;
        check_placeholders("steps", &self.steps.join("\n"), &["branch_step"], &[])?;
        check_placeholders("resume_block", &self.resume_block, &["resumes"], &["resumes"])?;
        for (name, body) in [
            ("system", &self.system),
            ("resume_step", &self.resume_step),
            ("expert_step", &self.expert_step),
            ("expert_block", &self.expert_block),
        ] {
            check_placeholders(name, body, &[], &[])?;
        }
        check_placeholders("constraints", &self.constraints.join("\n"), &[], &[])?;
        Ok(())
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("shipped template is valid")
    }

    /// Assembles the prompt for one JD. `resumes` are ordered most recent
    /// first; at most `max_resumes` are included. With no resumes the expert
    /// branch replaces the resume block.
    pub fn build(&self, original_jd: &str, resumes: &[&str], max_resumes: usize) -> Prompt {
        let used = &resumes[..resumes.len().min(max_resumes)];
        let branch_step = if used.is_empty() { &self.expert_step } else { &self.resume_step };
        let steps = self
            .steps
            .iter()
            .map(|s| render(s, &[("branch_step", branch_step)]))
            .enumerate()
            .map(|(i, s)| format!("{}. {s}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        let constraints = self.constraints.iter().map(|c| format!("- {c}")).collect::<Vec<_>>().join("\n");
        let jd = format!("<jd>\n{}\n</jd>", original_jd.trim());
        let block = if used.is_empty() {
            self.expert_block.clone()
        } else {
            let list = used
                .iter()
                .enumerate()
                .map(|(i, r)| format!("<resume index={}>\n{}\n</resume>", i + 1, r.trim()))
                .collect::<Vec<_>>()
                .join("\n");
            render(&self.resume_block, &[("resumes", &list)])
        };
        let user = render(
            &self.user,
            &[("steps", &steps), ("constraints", &constraints), ("original_jd", &jd), ("matched_resumes", &block)],
        );
        Prompt { system: self.system.clone(), user }
    }
}

/// A default template plus per-category variants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub default: PromptTemplate,
    pub overrides: BTreeMap<usize, PromptTemplate>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self { default: PromptTemplate::builtin(), overrides: BTreeMap::new() }
    }

    /// Reads `prompt.tmpl` (built-in default when absent) and any
    /// `prompt.<category slug>.tmpl` overrides from `dir`.
    pub fn load_dir(dir: &Path, vocab: &CategoryVocab) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let base = dir.join(TEMPLATE_FILE);
        let default = if base.exists() { PromptTemplate::parse(&read(&base)?)? } else { PromptTemplate::builtin() };
        let mut overrides = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut names: Vec<String> = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
        names.sort();
        for name in names {
            let Some(slug) = name.strip_prefix("prompt.").and_then(|s| s.strip_suffix(".tmpl")) else { continue };
            if slug.is_empty() || name == TEMPLATE_FILE {
                continue;
            }
            let cat = vocab
                .names()
                .iter()
                .position(|n| CategoryVocab::slug(n) == slug)
                .ok_or_else(|| Error::Augment(format!("template `{name}` names no known category")))?;
            let path = dir.join(&name);
            let t = PromptTemplate::parse(&read(&path)?).map_err(|e| Error::Augment(format!("{name}: {e}")))?;
            overrides.insert(cat, t);
        }
        Ok(Self { default, overrides })
    }

    pub fn for_category(&self, category: usize) -> &PromptTemplate {
        self.overrides.get(&category).unwrap_or(&self.default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parses() {
        let t = PromptTemplate::builtin();
        assert_eq!(t.steps.len(), 4);
        assert_eq!(t.constraints.len(), 3);
    }

    #[test]
    fn empty_resumes_use_expert_branch() {
        let t = PromptTemplate::builtin();
        let p = t.build("Data analyst. SQL.", &[], MAX_RESUMES);
        assert!(p.user.contains(&t.expert_block));
        assert!(p.user.contains(&t.expert_step));
        assert!(!p.user.contains("<resume"));
    }

    #[test]
    fn resume_cap_keeps_first_five() {
        let t = PromptTemplate::builtin();
        let resumes: Vec<String> = (1..=8).map(|i| format!("resume number {i}")).collect();
        let refs: Vec<&str> = resumes.iter().map(String::as_str).collect();
        let p = t.build("JD", &refs, MAX_RESUMES);
        assert_eq!(p.user.matches("<resume index=").count(), 5);
        assert!(p.user.contains("resume number 5") && !p.user.contains("resume number 6"));
        assert!(p.user.find("resume number 1").unwrap() < p.user.find("resume number 2").unwrap());
    }

    #[test]
    fn placeholder_rules() {
        let src = DEFAULT_TEMPLATE.replace("{matched_resumes}", "");
        assert!(PromptTemplate::parse(&src).is_err());
        let src = DEFAULT_TEMPLATE.replace("{original_jd}", "{original_jd} {original_jd}");
        assert!(PromptTemplate::parse(&src).is_err());
        let src = DEFAULT_TEMPLATE.replace("{steps}", "{stepz}");
        assert!(PromptTemplate::parse(&src).is_err());
    }

    #[test]
    fn braces_in_jd_are_not_expanded() {
        let p = PromptTemplate::builtin().build("Use {steps} literally", &[], 5);
        assert!(p.user.contains("Use {steps} literally"));
    }
}
