//! Small travel-planning task over a fixed catalog. Plans are scored by the
//! fraction of constraints they satisfy.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use super::{Instance, Scorer, TaskBundle};
use crate::model::Position;

pub const TRAIN_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotel {
    pub name: String,
    pub city: String,
    pub price_per_night: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Restaurant {
    pub name: String,
    pub city: String,
    pub price: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub cities: Vec<String>,
    pub hotels: Vec<Hotel>,
    pub restaurants: Vec<Restaurant>,
}

impl Catalog {
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../../data/tasks/planner_catalog.json"))
            .expect("bundled catalog parses")
    }

    fn hotel(&self, city: &str, name: &str) -> Option<&Hotel> {
        self.hotels
            .iter()
            .find(|h| h.city.eq_ignore_ascii_case(city) && h.name.eq_ignore_ascii_case(name))
    }

    fn restaurant(&self, city: &str, name: &str) -> Option<&Restaurant> {
        self.restaurants
            .iter()
            .find(|r| r.city.eq_ignore_ascii_case(city) && r.name.eq_ignore_ascii_case(name))
    }

    pub fn describe(&self) -> String {
        let mut out = String::from("Hotels (price per night):\n");
        for h in &self.hotels {
            out.push_str(&format!(
                "- {} in {}: {}\n",
                h.name, h.city, h.price_per_night
            ));
        }
        out.push_str("Restaurants (price per meal):\n");
        for r in &self.restaurants {
            out.push_str(&format!("- {} in {}: {}\n", r.name, r.city, r.price));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirements {
    pub cities: usize,
    pub nights: u32,
    pub min_stay: u32,
    pub budget: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Line {
    Stay {
        city: String,
        hotel: String,
        nights: u32,
    },
    Eat {
        city: String,
        restaurant: String,
    },
    Bad(String),
}

/// Reads `STAY city | hotel | nights` and `EAT city | restaurant` lines;
/// other lines are ignored.
pub fn parse_plan(text: &str) -> Vec<Line> {
    let mut out = Vec::new();
    for raw in text.lines() {
        let line = raw.trim().trim_start_matches(['-', '*']).trim();
        let Some((head, rest)) = line.split_once(char::is_whitespace) else {
            continue;
        };
        let fields: Vec<&str> = rest.split('|').map(str::trim).collect();
        match head.to_ascii_uppercase().trim_end_matches(':') {
            "STAY" => match fields.as_slice() {
                [city, hotel, nights] => match nights.trim_end_matches("nights").trim().parse() {
                    Ok(nights) => out.push(Line::Stay {
                        city: city.to_string(),
                        hotel: hotel.to_string(),
                        nights,
                    }),
                    Err(_) => out.push(Line::Bad(line.to_string())),
                },
                _ => out.push(Line::Bad(line.to_string())),
            },
            "EAT" => match fields.as_slice() {
                [city, restaurant] => out.push(Line::Eat {
                    city: city.to_string(),
                    restaurant: restaurant.to_string(),
                }),
                _ => out.push(Line::Bad(line.to_string())),
            },
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Constraint {
    Format,
    CityCount,
    TotalNights,
    MinStay,
    NoRepeat,
    Meals,
    Budget,
}

impl Constraint {
    pub const ALL: [Constraint; 7] = [
        Constraint::Format,
        Constraint::CityCount,
        Constraint::TotalNights,
        Constraint::MinStay,
        Constraint::NoRepeat,
        Constraint::Meals,
        Constraint::Budget,
    ];
}

/// Each constraint with the error text when it fails, in [`Constraint::ALL`] order.
pub fn check(
    catalog: &Catalog,
    req: &Requirements,
    plan: &str,
) -> Vec<(Constraint, Option<String>)> {
    let lines = parse_plan(plan);
    let mut format_errors = Vec::new();
    let mut stays = Vec::new();
    let mut meals = Vec::new();
    let mut cost: u64 = 0;
    for line in &lines {
        match line {
            Line::Stay {
                city,
                hotel,
                nights,
            } => match catalog.hotel(city, hotel) {
                Some(h) if *nights > 0 => {
                    cost += u64::from(h.price_per_night) * u64::from(*nights);
                    stays.push((city.to_lowercase(), *nights));
                }
                Some(_) => format_errors.push(format!("stay in {city} has zero nights")),
                None => format_errors.push(format!("no hotel `{hotel}` in {city}")),
            },
            Line::Eat { city, restaurant } => match catalog.restaurant(city, restaurant) {
                Some(r) => {
                    cost += u64::from(r.price);
                    meals.push((city.to_lowercase(), restaurant.to_lowercase()));
                }
                None => format_errors.push(format!("no restaurant `{restaurant}` in {city}")),
            },
            Line::Bad(l) => format_errors.push(format!("cannot read `{l}`")),
        }
    }
    if stays.is_empty() && format_errors.is_empty() {
        format_errors.push("the plan has no STAY line".into());
    }
    let fail = |c, msg: Option<String>| (c, msg);

    let mut out = vec![fail(
        Constraint::Format,
        (!format_errors.is_empty()).then(|| format!("format: {}", format_errors.join("; "))),
    )];

    let mut stay_cities: Vec<&str> = stays.iter().map(|(c, _)| c.as_str()).collect();
    let total_stays = stay_cities.len();
    stay_cities.sort_unstable();
    stay_cities.dedup();
    out.push(fail(
        Constraint::CityCount,
        (stay_cities.len() != req.cities).then(|| {
            format!(
                "city count: {} cities visited, {} required",
                stay_cities.len(),
                req.cities
            )
        }),
    ));

    let nights: u32 = stays.iter().map(|(_, n)| n).sum();
    out.push(fail(
        Constraint::TotalNights,
        (nights != req.nights)
            .then(|| format!("total nights: {nights} planned, {} required", req.nights)),
    ));

    let short: Vec<String> = stays
        .iter()
        .filter(|(_, n)| *n < req.min_stay)
        .map(|(c, n)| format!("{c} ({n})"))
        .collect();
    out.push(fail(
        Constraint::MinStay,
        (!short.is_empty()).then(|| {
            format!(
                "minimum stay: {} below {} nights",
                short.join(", "),
                req.min_stay
            )
        }),
    ));

    let mut seen = HashSet::new();
    let repeated_meals: Vec<&str> = meals
        .iter()
        .filter(|(_, r)| !seen.insert(r.as_str()))
        .map(|(_, r)| r.as_str())
        .collect();
    let repeat = total_stays != stay_cities.len() || !repeated_meals.is_empty();
    out.push(fail(
        Constraint::NoRepeat,
        repeat.then(|| "repeat visit: a city or restaurant appears twice".to_string()),
    ));

    let mut meals_per_city: BTreeMap<&str, usize> = BTreeMap::new();
    for (c, _) in &meals {
        *meals_per_city.entry(c.as_str()).or_default() += 1;
    }
    let hungry: Vec<&str> = stay_cities
        .iter()
        .copied()
        .filter(|c| !meals_per_city.contains_key(c))
        .collect();
    let stray: Vec<&str> = meals_per_city
        .keys()
        .copied()
        .filter(|c| !stay_cities.contains(c))
        .collect();
    out.push(fail(
        Constraint::Meals,
        (!hungry.is_empty() || !stray.is_empty()).then(|| {
            format!(
                "meals: no meal in [{}], meals outside stayed cities in [{}]",
                hungry.join(", "),
                stray.join(", ")
            )
        }),
    ));

    out.push(fail(
        Constraint::Budget,
        (cost > u64::from(req.budget))
            .then(|| format!("budget exceeded: total {cost} > {}", req.budget)),
    ));
    out
}

pub struct PlanScorer {
    pub catalog: Catalog,
}

impl Scorer for PlanScorer {
    fn id(&self) -> &str {
        "constraint_plan"
    }

    fn score(&self, instance: &Instance, answer: &str, _pos: &Position) -> (f64, Option<String>) {
        let req: Requirements = match serde_json::from_value(instance.reference.clone()) {
            Ok(r) => r,
            Err(e) => {
                return (
                    0.0,
                    Some(format!(
                        "instance `{}` has bad requirements: {e}",
                        instance.id
                    )),
                )
            }
        };
        let results = check(&self.catalog, &req, answer);
        let passed = results.iter().filter(|(_, e)| e.is_none()).count();
        let errors: Vec<String> = results.into_iter().filter_map(|(_, e)| e).collect();
        let score = passed as f64 / Constraint::ALL.len() as f64;
        (score, (!errors.is_empty()).then(|| errors.join("; ")))
    }
}

pub fn description(catalog: &Catalog) -> String {
    format!(
        "Plan short trips using only this catalog.\n{}\
Write the plan as lines `STAY <city> | <hotel> | <nights>` and `EAT <city> | <restaurant>`, one meal per EAT line.",
        catalog.describe()
    )
}

pub fn instances() -> Vec<Instance> {
    serde_json::from_str(include_str!("../../data/tasks/planner.json"))
        .expect("bundled planner data parses")
}

pub fn bundle() -> TaskBundle {
    let catalog = Catalog::builtin();
    let mut all = instances();
    let eval = all.split_off(TRAIN_SIZE);
    TaskBundle {
        id: "constraint-planner".into(),
        description: description(&catalog),
        train: all,
        eval,
        scorer: Arc::new(PlanScorer { catalog }),
    }
}
