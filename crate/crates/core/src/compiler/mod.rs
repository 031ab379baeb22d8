//! Property detection and greedy decomposition of a program into tasks.

mod patterns;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write};

use crate::parser::MlnProgram;
use crate::scalar::Scalar;

pub use patterns::{analyze_relation, detect_properties, KeyInfo, Property, Recursion, RelationInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    Coref,
    SimpleClassification,
    CorrelatedClassification,
    Generic,
}

impl TaskKind {
    pub fn from_annotation(s: &str) -> Option<Self> {
        Some(match s {
            "coref" => TaskKind::Coref,
            "classification" => TaskKind::SimpleClassification,
            "chain" => TaskKind::CorrelatedClassification,
            "generic" => TaskKind::Generic,
            _ => return None,
        })
    }

    pub fn annotation(&self) -> &'static str {
        match self {
            TaskKind::Coref => "coref",
            TaskKind::SimpleClassification => "classification",
            TaskKind::CorrelatedClassification => "chain",
            TaskKind::Generic => "generic",
        }
    }

    /// First kind in preference order whose requirements `info` meets.
    /// Relations without a detected key are sets of Boolean objects and
    /// satisfy the key requirement trivially.
    pub fn select(info: &RelationInfo) -> Self {
        if info.has(Property::Ref) && info.has(Property::Sym) && info.has(Property::Trn) {
            TaskKind::Coref
        } else if info.has(Property::NoRec) {
            TaskKind::SimpleClassification
        } else if info.has(Property::TrRec) {
            TaskKind::CorrelatedClassification
        } else {
            TaskKind::Generic
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Coref => "Coref",
            TaskKind::SimpleClassification => "SimpleClassification",
            TaskKind::CorrelatedClassification => "CorrelatedClassification",
            TaskKind::Generic => "Generic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: usize,
    pub name: String,
    pub kind: TaskKind,
    /// Rule indices, ascending.
    pub rules: Vec<usize>,
    /// Query relations this task is responsible for.
    pub owned: Vec<String>,
    /// Query relations mentioned by the task's rules.
    pub relations: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalPlan {
    pub tasks: Vec<Task>,
    pub relations: Vec<RelationInfo>,
    /// Query relations mentioned by two or more tasks.
    pub shared: BTreeSet<String>,
    /// Execution order: task ids in breadth-first order over the
    /// task/relation graph.
    pub sigma: Vec<usize>,
}

impl LogicalPlan {
    pub fn relation(&self, name: &str) -> Option<&RelationInfo> {
        self.relations.iter().find(|r| r.name == name)
    }

    /// Tasks touching `rel`, ascending by id.
    pub fn tasks_of(&self, rel: &str) -> Vec<usize> {
        self.tasks.iter().filter(|t| t.relations.contains(rel)).map(|t| t.id).collect()
    }

    pub fn task_of_rule(&self, rule: usize) -> Vec<usize> {
        self.tasks.iter().filter(|t| t.rules.binary_search(&rule).is_ok()).map(|t| t.id).collect()
    }
}

struct Builder<'a, T> {
    program: &'a MlnProgram<T>,
    tasks: Vec<Task>,
    generic: Option<usize>,
}

impl<T: Scalar> Builder<'_, T> {
    fn new_task(&mut self, name: String, kind: TaskKind) -> usize {
        let id = self.tasks.len();
        self.tasks.push(Task { id, name, kind, rules: Vec::new(), owned: Vec::new(), relations: BTreeSet::new() });
        id
    }

    fn generic_task(&mut self) -> usize {
        match self.generic {
            Some(g) => g,
            None => {
                let g = self.new_task("generic".into(), TaskKind::Generic);
                self.generic = Some(g);
                g
            }
        }
    }

    fn finish(mut self, relations: Vec<RelationInfo>) -> LogicalPlan {
        let program = self.program;
        let query: Vec<&str> = program.query_relations().map(|s| s.name.as_str()).collect();
        for t in &mut self.tasks {
            t.rules.sort_unstable();
            t.rules.dedup();
            for &r in &t.rules {
                for &q in &query {
                    if program.rules[r].mentions(q) {
                        t.relations.insert(q.to_string());
                    }
                }
            }
            t.owned.retain(|o| t.relations.contains(o));
        }
        let shared: BTreeSet<String> = query
            .iter()
            .filter(|q| self.tasks.iter().filter(|t| t.relations.contains(**q)).count() >= 2)
            .map(|q| q.to_string())
            .collect();
        let sigma = bfs_order(&self.tasks);
        LogicalPlan { tasks: self.tasks, relations, shared, sigma }
    }
}

fn bfs_order(tasks: &[Task]) -> Vec<usize> {
    let mut seen = vec![false; tasks.len()];
    let mut seen_rel: BTreeSet<&str> = BTreeSet::new();
    let mut order = Vec::with_capacity(tasks.len());
    for start in 0..tasks.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(t) = queue.pop_front() {
            order.push(t);
            for r in &tasks[t].relations {
                if !seen_rel.insert(r) {
                    continue;
                }
                for u in tasks.iter().filter(|u| u.relations.contains(r)) {
                    if !seen[u.id] {
                        seen[u.id] = true;
                        queue.push_back(u.id);
                    }
                }
            }
        }
    }
    order
}

/// Greedy decomposition. Rules carrying a `@task` annotation are pinned to
/// their task; the rest are grouped per query relation by the relation's
/// detected properties. Hard rules are copied into every task owning a
/// relation they mention.
pub fn assign_tasks<T: Scalar>(program: &MlnProgram<T>) -> LogicalPlan {
    let relations: Vec<RelationInfo> = program.query_relations().map(|s| analyze_relation(program, &s.name)).collect();
    let mut b = Builder { program, tasks: Vec::new(), generic: None };

    let mut named: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &program.rules {
        if let Some(a) = &r.task {
            let id = match named.get(a.name.as_str()) {
                Some(&id) => id,
                None => {
                    let id = b.new_task(a.name.clone(), a.kind);
                    named.insert(&a.name, id);
                    id
                }
            };
            b.tasks[id].rules.push(r.index);
            for q in program.query_relations() {
                if r.defines(&q.name) && !b.tasks[id].owned.contains(&q.name) {
                    b.tasks[id].owned.push(q.name.clone());
                }
            }
        }
    }

    let mut consumed: Vec<bool> = program.rules.iter().map(|r| r.task.is_some() || r.is_hard()).collect();
    for info in &relations {
        let defining: Vec<usize> = info.defining_rules.iter().copied().filter(|&i| program.rules[i].task.is_none()).collect();
        if defining.is_empty() {
            continue;
        }
        let kind = TaskKind::select(info);
        let id = if kind == TaskKind::Generic { b.generic_task() } else { b.new_task(info.name.clone(), kind) };
        b.tasks[id].owned.push(info.name.clone());
        for i in defining {
            if !consumed[i] {
                consumed[i] = true;
                b.tasks[id].rules.push(i);
            }
        }
    }
    for r in program.rules.iter().filter(|r| !consumed[r.index]) {
        let g = b.generic_task();
        b.tasks[g].rules.push(r.index);
    }

    for r in program.rules.iter().filter(|r| r.is_hard()) {
        let owners: Vec<usize> = b.tasks.iter().filter(|t| t.owned.iter().any(|o| r.mentions(o))).map(|t| t.id).collect();
        if owners.is_empty() && r.task.is_none() {
            let g = b.generic_task();
            b.tasks[g].rules.push(r.index);
        }
        for o in owners {
            b.tasks[o].rules.push(r.index);
        }
    }
    b.finish(relations)
}

/// Every rule in a single generic task.
pub fn monolithic_plan<T: Scalar>(program: &MlnProgram<T>) -> LogicalPlan {
    let relations = program.query_relations().map(|s| analyze_relation(program, &s.name)).collect();
    let mut b = Builder { program, tasks: Vec::new(), generic: None };
    if !program.rules.is_empty() {
        let g = b.generic_task();
        b.tasks[g].rules = (0..program.rules.len()).collect();
        b.tasks[g].owned = program.query_relations().map(|s| s.name.clone()).collect();
    }
    b.finish(relations)
}

/// Human-readable plan dump.
pub fn explain(plan: &LogicalPlan) -> String {
    let mut out = String::new();
    writeln!(out, "relations:").unwrap();
    for r in &plan.relations {
        let props: Vec<String> = r.properties.iter().map(|p| p.to_string()).collect();
        let shared = if plan.shared.contains(&r.name) { " shared" } else { "" };
        writeln!(out, "  {} {{{}}}{shared}", r.name, props.join(", ")).unwrap();
    }
    writeln!(out, "tasks:").unwrap();
    for t in &plan.tasks {
        let rules: Vec<String> = t.rules.iter().map(|r| format!("#{}", r + 1)).collect();
        let rels: Vec<&str> = t.relations.iter().map(String::as_str).collect();
        writeln!(out, "  [{}] {} {}", t.id, t.name, t.kind).unwrap();
        writeln!(out, "    rules: {}", rules.join(" ")).unwrap();
        writeln!(out, "    owns: {}", t.owned.join(" ")).unwrap();
        writeln!(out, "    touches: {}", rels.join(" ")).unwrap();
    }
    let order: Vec<String> = plan.sigma.iter().map(|t| t.to_string()).collect();
    writeln!(out, "order: {}", order.join(" ")).unwrap();
    out
}
