use rand::Rng;
use serde_json::{json, Value};

use nodal_core::correlations::{census, check_alpha_bound, C6Status, CorrelationCensus};
use nodal_core::kacrice::{estimate_singular_measure, k2_pointwise, K2Diagnostic};
use nodal_core::moments::{moment_value, moments_csv, MAX_ORDER};
use nodal_core::predict::variance_prediction;
use nodal_core::simulate::batch_stats;
use nodal_core::spectral::{
    all_exact_integrals, assemble_l_integrals, IntegralReport, Order6Status, TupleMaterials,
};
use nodal_core::{enumerate_frequencies, rng, FrequencySet};

use crate::{CliError, Command, RunConfig};

/// A rendered result before the config envelope is added.
pub struct Outcome {
    pub json: Value,
    pub csv: Option<String>,
    pub partial: bool,
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn sets(config: &RunConfig) -> Result<Vec<FrequencySet>, CliError> {
    config
        .m_values
        .iter()
        .map(|&m| enumerate_frequencies(config.d, m, config.mode()).map_err(CliError::from))
        .collect()
}

pub fn dispatch(config: &RunConfig) -> Result<Outcome, CliError> {
    let sets = sets(config)?;
    match config.command {
        Command::Lattice => lattice(&sets),
        Command::Census => census_cmd(config, &sets),
        Command::Moments => moments(&sets),
        Command::Integrals => integrals(config, &sets),
        Command::Kacrice => kacrice(config, &sets),
        Command::Simulate => simulate(config, &sets),
        Command::Predict => predict(config, &sets),
        Command::Report => report(config, &sets[0]),
    }
}

fn lattice(sets: &[FrequencySet]) -> Result<Outcome, CliError> {
    let mut csv = String::from("m,index");
    for k in 1..=sets[0].d() {
        csv.push_str(&format!(",x{k}"));
    }
    csv.push('\n');
    for s in sets {
        for (i, p) in s.points().enumerate() {
            let coords: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            csv.push_str(&format!("{},{},{}\n", s.m(), i, coords.join(",")));
        }
    }
    Ok(Outcome {
        json: Value::Array(sets.iter().map(|s| s.to_json()).collect()),
        csv: Some(csv),
        partial: false,
    })
}

fn census_entry(c: &CorrelationCensus) -> Result<Value, CliError> {
    let mut v = to_value(c)?;
    v["c6_status"] = to_value(&c.c6_status)?;
    Ok(v)
}

fn census_all(config: &RunConfig, sets: &[FrequencySet]) -> Result<Vec<CorrelationCensus>, CliError> {
    sets.iter()
        .map(|s| census(s, Some(config.c6_budget)).map_err(CliError::from))
        .collect()
}

fn census_cmd(config: &RunConfig, sets: &[FrequencySet]) -> Result<Outcome, CliError> {
    let cs = census_all(config, sets)?;
    let partial = cs.iter().any(|c| c.c6_status == C6Status::BudgetExceeded);
    let fit = if cs.len() >= 5 && config.d >= 4 {
        Some(to_value(&check_alpha_bound(&cs, config.d)?)?)
    } else {
        None
    };
    let mut csv = String::from("m,n,c4,d_sym,d_diag,x4,c6\n");
    for c in &cs {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.m,
            c.n,
            c.c4,
            c.d_sym,
            c.d_diag,
            c.x4,
            c.c6.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    Ok(Outcome {
        json: json!({
            "census": cs.iter().map(census_entry).collect::<Result<Vec<_>, _>>()?,
            "alpha_fit": fit,
        }),
        csv: Some(csv),
        partial,
    })
}

fn moments(sets: &[FrequencySet]) -> Result<Outcome, CliError> {
    let mut rows = Vec::new();
    let mut json = Vec::new();
    for s in sets {
        let values = (1..=MAX_ORDER)
            .map(|k| moment_value(s, k))
            .collect::<Result<Vec<_>, _>>()?;
        json.push(json!({ "m": s.m(), "n": s.n(), "moments": to_value(&values)? }));
        rows.extend(values.into_iter().map(|v| (s.m(), v)));
    }
    Ok(Outcome {
        json: Value::Array(json),
        csv: Some(moments_csv(&rows)),
        partial: false,
    })
}

fn integral_report(config: &RunConfig, s: &FrequencySet) -> Result<IntegralReport, CliError> {
    let mat = TupleMaterials::build(s, config.table_cap)?;
    let set = all_exact_integrals(s, &mat, Some(config.c6_budget))?;
    Ok(assemble_l_integrals(&set)?)
}

fn integrals(config: &RunConfig, sets: &[FrequencySet]) -> Result<Outcome, CliError> {
    let reports = sets
        .iter()
        .map(|s| integral_report(config, s))
        .collect::<Result<Vec<_>, _>>()?;
    let partial = reports
        .iter()
        .any(|r| r.order6_status == Order6Status::BudgetExceeded);
    let mut csv = String::from("m,tag,num,den,e_power,value\n");
    for r in &reports {
        for i in &r.integrals {
            csv.push_str(&format!(
                "{},{},{},{},{},{:.17e}\n",
                r.m,
                i.tag.name(),
                i.value.numer(),
                i.value.denom(),
                i.e_power,
                i.value_f64()
            ));
        }
    }
    Ok(Outcome {
        json: to_value(&reports)?,
        csv: Some(csv),
        partial,
    })
}

/// Per-point seeds spread by the golden-ratio increment so points never
/// share a norm-product stream.
fn point_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn k2_points(config: &RunConfig, s: &FrequencySet) -> Result<Vec<K2Diagnostic>, CliError> {
    (0..config.points)
        .map(|i| {
            let mut g = rng::stream(config.seed, rng::domain::POINTS, s.m(), i as u64);
            let x: Vec<f64> = (0..s.d()).map(|_| g.random()).collect();
            k2_pointwise(s, &x, config.mc_samples, point_seed(config.seed, i)).map_err(CliError::from)
        })
        .collect()
}

fn kacrice_entry(config: &RunConfig, s: &FrequencySet) -> Result<(Value, Vec<K2Diagnostic>), CliError> {
    let points = k2_points(config, s)?;
    let measure = estimate_singular_measure(s, config.singular_samples, config.seed)?;
    let c = census(s, None)?;
    let r4 = nodal_core::rational::to_f64(&c.r4);
    Ok((
        json!({
            "m": s.m(),
            "n": s.n(),
            "points": to_value(&points)?,
            "singular_measure": to_value(&measure)?,
            "singular_bound_16^4_r4": 16f64.powi(4) * r4,
        }),
        points,
    ))
}

fn kacrice(config: &RunConfig, sets: &[FrequencySet]) -> Result<Outcome, CliError> {
    let mut json = Vec::new();
    let mut csv = String::from("m,point,r,singular,k2_mc,k2_se,k2_series,eps_monitor\n");
    for s in sets {
        let (entry, points) = kacrice_entry(config, s)?;
        json.push(entry);
        for (i, p) in points.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{:.12e},{},{:.12e},{:.12e},{},{:.12e}\n",
                s.m(),
                i,
                p.r,
                p.singular.is_singular(),
                p.k2_mc,
                p.k2_se,
                p.k2_series.map(|v| format!("{v:.12e}")).unwrap_or_default(),
                p.eps_monitor
            ));
        }
    }
    Ok(Outcome {
        json: Value::Array(json),
        csv: Some(csv),
        partial: false,
    })
}

fn simulate(config: &RunConfig, sets: &[FrequencySet]) -> Result<Outcome, CliError> {
    let mut json = Vec::new();
    let mut csv = String::from("m,sample,volume,std_error\n");
    for s in sets {
        let b = batch_stats(s, config.samples, config.lines, config.seed)?;
        for r in &b.rows {
            csv.push_str(&format!("{},{},{:.12e},{:.12e}\n", s.m(), r.index, r.volume, r.std_error));
        }
        csv.push_str(&format!("{},mean,{:.12e},{:.12e}\n", s.m(), b.mean, b.mean_se));
        json.push(json!({ "summary": to_value(&b)?, "samples": to_value(&b.rows)? }));
    }
    Ok(Outcome {
        json: Value::Array(json),
        csv: Some(csv),
        partial: false,
    })
}

fn predict(config: &RunConfig, sets: &[FrequencySet]) -> Result<Outcome, CliError> {
    let cs = census_all(config, sets)?;
    let partial = cs.iter().any(|c| c.c6_status == C6Status::BudgetExceeded);
    let preds = cs
        .iter()
        .map(variance_prediction)
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("m,n,expected_volume,main_term,rw_bound,conjecture_bound,thm_bound_shape\n");
    for p in &preds {
        csv.push_str(&format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
            p.m,
            p.n,
            p.expected_volume,
            p.main_term,
            p.rw_bound,
            p.conjecture_bound,
            p.thm_bound_shape.map(|v| format!("{v:.12e}")).unwrap_or_default()
        ));
    }
    Ok(Outcome {
        json: to_value(&preds)?,
        csv: Some(csv),
        partial,
    })
}

fn report(config: &RunConfig, s: &FrequencySet) -> Result<Outcome, CliError> {
    let c = census(s, Some(config.c6_budget))?;
    let integrals = integral_report(config, s)?;
    let partial = c.c6_status == C6Status::BudgetExceeded
        || integrals.order6_status == Order6Status::BudgetExceeded;
    let moments = (1..=MAX_ORDER)
        .map(|k| moment_value(s, k))
        .collect::<Result<Vec<_>, _>>()?;
    let (kacrice, _) = kacrice_entry(config, s)?;
    let sim = batch_stats(s, config.samples, config.lines, config.seed)?;
    Ok(Outcome {
        json: json!({
            "d": s.d(),
            "m": s.m(),
            "n": s.n(),
            "census": census_entry(&c)?,
            "moments": to_value(&moments)?,
            "integrals": to_value(&integrals)?,
            "kacrice": kacrice,
            "simulation": to_value(&sim)?,
            "prediction": to_value(&variance_prediction(&c)?)?,
        }),
        csv: None,
        partial,
    })
}
