//! In-order transition system for building categories.
//!
//! | action   | effect                          | side condition                          |
//! |----------|---------------------------------|-----------------------------------------|
//! | `gen(a)` | push atom `a`                   | stack empty, or top is an operator      |
//! | `op(X)`  | push slash `X`                  | top exists and is not an operator       |
//! | `reduce` | pop `s1 X s0`, push their tree  | top three are non-op, op, non-op        |
//! | `stop`   | terminate                       | exactly one non-operator on the stack   |
//!
//! Punctuation atoms may only be generated on an empty stack, after which
//! only `stop` is legal. Under these rules every terminated run yields a
//! well-formed category.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::category::{Atom, Category, PunctuationSet, Slash};

pub const DEFAULT_MAX_ACTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Gen(Atom),
    Op(Slash),
    Reduce,
    Stop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Gen(a) => write!(f, "gen({a})"),
            Action::Op(s) => write!(f, "op({s})"),
            Action::Reduce => f.write_str("reduce"),
            Action::Stop => f.write_str("stop"),
        }
    }
}

impl FromStr for Action {
    type Err = TransitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TransitionError::BadAction(s.to_string());
        match s {
            "reduce" => Ok(Action::Reduce),
            "stop" => Ok(Action::Stop),
            "op(/)" => Ok(Action::Op(Slash::Forward)),
            "op(\\)" => Ok(Action::Op(Slash::Backward)),
            _ => {
                let inner = s
                    .strip_prefix("gen(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(bad)?;
                inner.parse::<Atom>().map(Action::Gen).map_err(|_| bad())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StackItem {
    Leaf(Atom),
    Operator(Slash),
    Subtree(Category),
}

impl StackItem {
    pub fn is_operator(&self) -> bool {
        matches!(self, StackItem::Operator(_))
    }

    fn category(&self) -> Option<Category> {
        match self {
            StackItem::Leaf(a) => Some(Category::Atom(a.clone())),
            StackItem::Subtree(c) => Some(c.clone()),
            StackItem::Operator(_) => None,
        }
    }
}

impl fmt::Display for StackItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackItem::Leaf(a) => write!(f, "{a}"),
            StackItem::Operator(s) => write!(f, "{s}"),
            StackItem::Subtree(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TransitionState {
    stack: Vec<StackItem>,
    buffer: Vec<Atom>,
    timestep: usize,
    terminated: bool,
    punct_generated: bool,
    last_action: Option<Action>,
}

impl TransitionState {
    pub fn initial() -> Self {
        Self::default()
    }

    pub fn stack(&self) -> &[StackItem] {
        &self.stack
    }

    /// Atoms generated so far.
    pub fn buffer(&self) -> &[Atom] {
        &self.buffer
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn punct_generated(&self) -> bool {
        self.punct_generated
    }

    pub fn last_action(&self) -> Option<&Action> {
        self.last_action.as_ref()
    }

    fn top(&self) -> Option<&StackItem> {
        self.stack.last()
    }

    /// The finished category.
    pub fn result(&self) -> Result<Category, TransitionError> {
        if !self.terminated {
            return Err(TransitionError::NotTerminated);
        }
        self.stack
            .first()
            .and_then(StackItem::category)
            .ok_or(TransitionError::NotTerminated)
    }

    /// Fewest actions that can still bring this state to termination.
    pub fn completion_cost(&self) -> usize {
        if self.terminated {
            return 0;
        }
        let operators = self.stack.iter().filter(|i| i.is_operator()).count();
        match self.top() {
            None => 2,
            Some(top) if top.is_operator() => operators + 2,
            Some(_) => operators + 1,
        }
    }

    pub fn render_stack(&self) -> String {
        self.stack.iter().map(ToString::to_string).collect::<Vec<_>>().join("|")
    }

    pub fn render_buffer(&self) -> String {
        self.buffer
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("illegal action {action}: {reason}")]
    IllegalAction { action: String, reason: &'static str },
    #[error("state is not terminated")]
    NotTerminated,
    #[error("cannot parse action {0:?}")]
    BadAction(String),
}

#[derive(Debug, Clone)]
pub struct TransitionSystem {
    punctuation: PunctuationSet,
    max_actions: usize,
}

impl Default for TransitionSystem {
    fn default() -> Self {
        TransitionSystem::new(PunctuationSet::default(), DEFAULT_MAX_ACTIONS)
    }
}

impl TransitionSystem {
    pub fn new(punctuation: PunctuationSet, max_actions: usize) -> Self {
        TransitionSystem {
            punctuation,
            max_actions,
        }
    }

    pub fn max_actions(&self) -> usize {
        self.max_actions
    }

    pub fn punctuation(&self) -> &PunctuationSet {
        &self.punctuation
    }

    /// Checks an action against the side conditions, naming the violated one.
    pub fn check(&self, s: &TransitionState, a: &Action) -> Result<(), TransitionError> {
        let fail = |reason| {
            Err(TransitionError::IllegalAction {
                action: a.to_string(),
                reason,
            })
        };
        if s.terminated {
            return fail("state is terminated");
        }
        if s.timestep >= self.max_actions {
            return fail("action cap reached");
        }
        if s.punct_generated && *a != Action::Stop {
            return fail("only stop may follow a punctuation atom");
        }
        match a {
            Action::Gen(atom) => {
                if self.punctuation.contains(atom) && !s.stack.is_empty() {
                    return fail("punctuation can only be generated on an empty stack");
                }
                match s.top() {
                    None => Ok(()),
                    Some(top) if top.is_operator() => Ok(()),
                    Some(_) => fail("gen requires an empty stack or an operator on top"),
                }
            }
            Action::Op(_) => match s.top() {
                Some(top) if !top.is_operator() => Ok(()),
                _ => fail("op requires a non-operator on top of the stack"),
            },
            Action::Reduce => {
                let n = s.stack.len();
                if n < 3 {
                    return fail("reduce requires three stack items");
                }
                let (s1, x, s0) = (&s.stack[n - 3], &s.stack[n - 2], &s.stack[n - 1]);
                if !s1.is_operator() && x.is_operator() && !s0.is_operator() {
                    Ok(())
                } else {
                    fail("reduce requires non-operator, operator, non-operator on top")
                }
            }
            Action::Stop => match s.stack.as_slice() {
                [only] if !only.is_operator() => Ok(()),
                [_] => fail("stop requires a non-operator stack item"),
                _ => fail("stop requires exactly one stack item"),
            },
        }
    }

    /// Legal actions in a fixed order: gens (in `atoms` order), op(/), op(\),
    /// reduce, stop.
    pub fn legal_actions(&self, s: &TransitionState, atoms: &[Atom]) -> Vec<Action> {
        candidate_actions(atoms).filter(|a| self.check(s, a).is_ok()).collect()
    }

    /// Legal actions after which the run can still terminate within `budget`
    /// total actions.
    pub fn viable_actions(&self, s: &TransitionState, atoms: &[Atom], budget: usize) -> Vec<Action> {
        self.legal_actions(s, atoms)
            .into_iter()
            .filter(|a| {
                let next = self.apply(s, a).expect("legal action");
                next.timestep + next.completion_cost() <= budget
            })
            .collect()
    }

    pub fn apply(&self, s: &TransitionState, a: &Action) -> Result<TransitionState, TransitionError> {
        self.check(s, a)?;
        let mut next = s.clone();
        match a {
            Action::Gen(atom) => {
                next.stack.push(StackItem::Leaf(atom.clone()));
                next.buffer.push(atom.clone());
                if self.punctuation.contains(atom) {
                    next.punct_generated = true;
                }
            }
            Action::Op(slash) => next.stack.push(StackItem::Operator(*slash)),
            Action::Reduce => {
                let s0 = next.stack.pop().and_then(|i| i.category()).expect("checked");
                let slash = match next.stack.pop() {
                    Some(StackItem::Operator(x)) => x,
                    _ => unreachable!("checked"),
                };
                let s1 = next.stack.pop().and_then(|i| i.category()).expect("checked");
                next.stack.push(StackItem::Subtree(Category::complex(s1, slash, s0)));
            }
            Action::Stop => next.terminated = true,
        }
        next.timestep += 1;
        next.last_action = Some(a.clone());
        Ok(next)
    }

    /// Applies a whole action sequence from the initial state.
    pub fn replay(&self, actions: &[Action]) -> Result<TransitionState, TransitionError> {
        actions
            .iter()
            .try_fold(TransitionState::initial(), |s, a| self.apply(&s, a))
    }

    /// Every terminated run of at most `max_actions` actions, depth first.
    pub fn enumerate_terminated(&self, atoms: &[Atom], max_actions: usize) -> Vec<(Vec<Action>, Category)> {
        let budget = max_actions.min(self.max_actions);
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.dfs(&TransitionState::initial(), atoms, budget, &mut path, &mut out);
        out
    }

    fn dfs(
        &self,
        s: &TransitionState,
        atoms: &[Atom],
        budget: usize,
        path: &mut Vec<Action>,
        out: &mut Vec<(Vec<Action>, Category)>,
    ) {
        if s.terminated {
            out.push((path.clone(), s.result().expect("terminated")));
            return;
        }
        for a in self.viable_actions(s, atoms, budget) {
            let next = self.apply(s, &a).expect("viable action is legal");
            path.push(a);
            self.dfs(&next, atoms, budget, path, out);
            path.pop();
        }
    }

    /// One row per action of the oracle run: timestep, stack, buffer, action.
    pub fn trace(&self, c: &Category) -> Result<Vec<TraceRow>, TransitionError> {
        let mut state = TransitionState::initial();
        let mut rows = Vec::new();
        for action in oracle_actions(c) {
            rows.push(TraceRow {
                timestep: state.timestep,
                stack: state.render_stack(),
                buffer: state.render_buffer(),
                action: action.to_string(),
            });
            state = self.apply(&state, &action)?;
        }
        Ok(rows)
    }
}

fn candidate_actions(atoms: &[Atom]) -> impl Iterator<Item = Action> + '_ {
    atoms.iter().cloned().map(Action::Gen).chain([
        Action::Op(Slash::Forward),
        Action::Op(Slash::Backward),
        Action::Reduce,
        Action::Stop,
    ])
}

/// Full output label space of the transition scorer for an atom set.
pub fn action_space(atoms: &[Atom]) -> Vec<Action> {
    candidate_actions(atoms).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub timestep: usize,
    pub stack: String,
    pub buffer: String,
    pub action: String,
}

impl fmt::Display for TraceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}", self.timestep, self.stack, self.buffer, self.action)
    }
}

/// In-order traversal: result, operator, argument, reduce; then stop.
pub fn oracle_actions(c: &Category) -> Vec<Action> {
    fn visit(c: &Category, out: &mut Vec<Action>) {
        match c {
            Category::Atom(a) => out.push(Action::Gen(a.clone())),
            Category::Complex {
                result,
                slash,
                argument,
            } => {
                visit(result, out);
                out.push(Action::Op(*slash));
                visit(argument, out);
                out.push(Action::Reduce);
            }
        }
    }
    let mut out = Vec::new();
    visit(c, &mut out);
    out.push(Action::Stop);
    out
}
