//! Generators for well-formed domain and instance documents.

#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;

use capkit_core::dsl::{
    ActionDef, ActionSemantics, AgentPlacement, ArgKind, Behavior, Direction, Evaluator, GoalDef,
    GridPos, ParamDef, Placement, PredicateDef, TypeDef,
};
use capkit_core::{DomainSpec, InstanceSpec};

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,5}"
}

const SEMANTICS: [&str; 6] = [
    "move-up",
    "move-down",
    "move-left",
    "move-right",
    "interact",
    "special-interact",
];

pub fn domain() -> impl Strategy<Value = DomainSpec> {
    let types = prop::collection::vec((name(), 1..Behavior::ALL.len()), 0..5);
    let actions = prop::collection::vec((0..SEMANTICS.len(), "[A-Z]"), 0..6);
    let preds = prop::collection::vec(
        (
            name(),
            0..Evaluator::ALL.len(),
            any::<prop::sample::Index>(),
        ),
        0..7,
    );
    let goals = prop::collection::vec((any::<prop::sample::Index>(), any::<bool>()), 0..4);
    (name(), types, actions, preds, goals).prop_map(|(dname, types, actions, preds, goals)| {
        // One avatar type always, so instances can be built on top.
        let mut object_types = vec![TypeDef {
            name: "avatar0".into(),
            behavior: Behavior::Avatar,
        }];
        for (i, (n, b)) in types.into_iter().enumerate() {
            object_types.push(TypeDef {
                name: format!("{n}{}", i + 1),
                behavior: Behavior::ALL[b],
            });
        }
        let mut keys = BTreeSet::new();
        let actions = actions
            .into_iter()
            .enumerate()
            .filter(|(_, (_, k))| keys.insert(k.clone()))
            .map(|(_, (s, k))| ActionDef {
                key: k,
                semantics: ActionSemantics::from_tag(SEMANTICS[s]).unwrap(),
            })
            .collect();
        let predicates: Vec<PredicateDef> = preds
            .into_iter()
            .enumerate()
            .map(|(i, (n, e, pick))| {
                let ev = Evaluator::ALL[e];
                let params = ev
                    .signature()
                    .iter()
                    .enumerate()
                    .map(|(k, kind)| ParamDef {
                        name: format!("p{k}"),
                        ty: match kind {
                            ArgKind::Cell => "cell".into(),
                            ArgKind::Object => {
                                let choice = pick.index(object_types.len() + 1);
                                if choice == object_types.len() {
                                    "object".into()
                                } else {
                                    object_types[choice].name.clone()
                                }
                            }
                        },
                    })
                    .collect();
                PredicateDef {
                    name: format!("{n}{i}"),
                    params,
                    evaluator: ev,
                }
            })
            .collect();
        let goals = if predicates.is_empty() {
            Vec::new()
        } else {
            goals
                .into_iter()
                .map(|(p, positive)| GoalDef {
                    predicate: p.get(&predicates).name.clone(),
                    positive,
                })
                .collect()
        };
        DomainSpec {
            name: dname,
            object_types,
            actions,
            predicates,
            goals,
        }
    })
}

/// An instance over `d`: distinct cells for the agent, walls and objects.
pub fn instance(d: &DomainSpec) -> impl Strategy<Value = InstanceSpec> {
    let d = d.clone();
    (2u8..9, 2u8..9)
        .prop_flat_map(|(rows, cols)| {
            let cells = rows as usize * cols as usize;
            (
                Just((rows, cols)),
                Just((0..cells).collect::<Vec<_>>()).prop_shuffle(),
                0..cells,
                0..4usize,
                prop::collection::vec(any::<prop::sample::Index>(), cells),
            )
        })
        .prop_map(move |((rows, cols), order, split, facing, kinds)| {
            let pos = |i: usize| GridPos::new((i / cols as usize) as u8, (i % cols as usize) as u8);
            let rest = &order[1..];
            let split = split.min(rest.len());
            let walls = rest[..split].iter().map(|&i| pos(i)).collect();
            let others: Vec<&TypeDef> = d
                .object_types
                .iter()
                .filter(|t| t.behavior != Behavior::Avatar)
                .collect();
            let objects = if others.is_empty() {
                Vec::new()
            } else {
                rest[split..]
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| Placement {
                        id: format!("o{k}"),
                        ty: kinds[k].get(&others).name.clone(),
                        pos: pos(i),
                    })
                    .collect()
            };
            InstanceSpec {
                domain: d.name.clone(),
                rows,
                cols,
                walls,
                agent: AgentPlacement {
                    id: "me".into(),
                    ty: "avatar0".into(),
                    pos: pos(order[0]),
                    facing: Direction::ALL[facing],
                },
                objects,
            }
        })
}

pub fn domain_and_instance() -> impl Strategy<Value = (DomainSpec, InstanceSpec)> {
    domain().prop_flat_map(|d| {
        let i = instance(&d);
        (Just(d), i)
    })
}
