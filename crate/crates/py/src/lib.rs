//! Python bindings. Amounts cross the boundary as Python ints; structured
//! results come back as plain dicts/lists with amounts as decimal strings,
//! the same shape the CLI prints.

use a2mm_core::amm::{apply_swap, quote, spot_price, Asset};
use a2mm_core::{arbitrage, engine, netsim, routing, trace};
use a2mm_core::{AssetAmount, Direction, FeeRate, PoolState, SwapAction};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn direction(s: &str) -> PyResult<Direction> {
    s.parse().map_err(err)
}

/// A constant-product market. Reserves are integers in base units.
#[pyclass(name = "Pool", from_py_object)]
#[derive(Clone)]
pub struct Pool {
    inner: PoolState,
}

#[pymethods]
impl Pool {
    #[new]
    #[pyo3(signature = (market_id, x, y, fee_num = 997, fee_den = 1000))]
    fn new(market_id: String, x: u128, y: u128, fee_num: u64, fee_den: u64) -> PyResult<Self> {
        let fee = FeeRate::new(fee_num as u128, fee_den as u128).map_err(err)?;
        Ok(Pool { inner: PoolState::new(market_id, x, y).with_fee(fee) })
    }

    #[getter]
    fn market_id(&self) -> &str {
        &self.inner.market_id
    }

    #[getter]
    fn x(&self) -> u128 {
        self.inner.x.0
    }

    #[getter]
    fn y(&self) -> u128 {
        self.inner.y.0
    }

    #[getter]
    fn fee(&self) -> (u128, u128) {
        (self.inner.fee.num(), self.inner.fee.den())
    }

    /// Price of X in units of Y.
    fn spot_price(&self) -> f64 {
        spot_price(&self.inner)
    }

    fn quote(&self, direction: &str, amount_in: u128) -> PyResult<u128> {
        Ok(quote(&self.inner, self::direction(direction)?, AssetAmount(amount_in)).map_err(err)?.0)
    }

    /// Returns `(new_pool, amount_out)`; the pool itself is not modified.
    #[pyo3(signature = (direction, amount_in, min_out = 0))]
    fn swap(&self, direction: &str, amount_in: u128, min_out: u128) -> PyResult<(Pool, u128)> {
        let action = SwapAction::new(self.inner.market_id.clone(), self::direction(direction)?, amount_in).with_min_out(min_out);
        let (next, out) = apply_swap(&self.inner, &action).map_err(err)?;
        Ok((Pool { inner: next }, out.0))
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("Pool({:?}, x={}, y={}, fee={}/{})", p.market_id, p.x.0, p.y.0, p.fee.num(), p.fee.den())
    }

    fn __eq__(&self, other: &Pool) -> bool {
        self.inner == other.inner
    }
}

fn states(pools: &[Pool]) -> Vec<PoolState> {
    pools.iter().map(|p| p.inner.clone()).collect()
}

/// Splits `amount_in` across pools to maximise total output.
#[pyfunction(name = "route")]
fn py_route(py: Python<'_>, pools: Vec<Pool>, direction: &str, amount_in: u128) -> PyResult<Py<PyAny>> {
    let plan = routing::route(&states(&pools), self::direction(direction)?, AssetAmount(amount_in)).map_err(err)?;
    to_py(py, &plan)
}

/// Optimal input (in X, bought on `pool1`) and integer profit for a pair.
#[pyfunction]
fn optimal_arbitrage(pool1: &Pool, pool2: &Pool) -> PyResult<(u128, i128)> {
    let d = arbitrage::optimal_input(&pool1.inner, &pool2.inner).map_err(err)?.0;
    let profit = arbitrage::profit_at(&pool1.inner, &pool2.inner, d).map_err(err)?;
    Ok((d, profit))
}

#[pyfunction]
fn is_profitable(pool1: &Pool, pool2: &Pool) -> bool {
    arbitrage::is_profitable(&pool1.inner, &pool2.inner)
}

/// Levels every pool; returns the plan, final states and cost counters.
#[pyfunction]
#[pyo3(signature = (pools, profit_asset = "x"))]
fn n_pool_arbitrage(py: Python<'_>, pools: Vec<Pool>, profit_asset: &str) -> PyResult<Py<PyAny>> {
    let asset = match profit_asset {
        "x" | "X" => Asset::X,
        "y" | "Y" => Asset::Y,
        other => return Err(err(format!("unknown asset {other:?}"))),
    };
    to_py(py, &arbitrage::n_pool_arbitrage(&states(&pools), asset).map_err(err)?)
}

fn request(direction: &str, amount_in: u128, min_out: u128, arbitrage: bool) -> PyResult<engine::A2mmRequest> {
    let mut req = engine::A2mmRequest::new(self::direction(direction)?, amount_in);
    req.min_amount_out = AssetAmount(min_out);
    req.arbitrage_enabled = arbitrage;
    Ok(req)
}

/// Plans an aggregated swap without touching the pools.
#[pyfunction]
#[pyo3(signature = (pools, direction, amount_in, min_out = 0, arbitrage = true))]
fn plan(py: Python<'_>, pools: Vec<Pool>, direction: &str, amount_in: u128, min_out: u128, arbitrage: bool) -> PyResult<Py<PyAny>> {
    let req = request(direction, amount_in, min_out, arbitrage)?;
    to_py(py, &engine::plan(&req, &states(&pools)).map_err(err)?)
}

/// Plans and executes atomically; returns `(post_pools, report)`.
#[pyfunction]
#[pyo3(signature = (pools, direction, amount_in, min_out = 0, arbitrage = true))]
fn execute(
    py: Python<'_>,
    pools: Vec<Pool>,
    direction: &str,
    amount_in: u128,
    min_out: u128,
    arbitrage: bool,
) -> PyResult<(Vec<Pool>, Py<PyAny>)> {
    let req = request(direction, amount_in, min_out, arbitrage)?;
    let pools = states(&pools);
    let p = engine::plan(&req, &pools).map_err(err)?;
    let (post, report) = engine::execute(&p, &pools).map_err(err)?;
    Ok((post.into_iter().map(|inner| Pool { inner }).collect(), to_py(py, &report)?))
}

/// Classifies MEV overhead in a JSON-lines trace.
#[pyfunction]
fn analyze_trace(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let t = trace::Trace::parse(text).map_err(err)?;
    to_py(py, &trace::classify(&t))
}

/// Synthetic trace with planted overhead; returns `(jsonl, answer_key)`.
#[pyfunction]
#[pyo3(signature = (seed = 7, opportunities = 100, blockspace = 300, network = 500))]
fn generate_trace(py: Python<'_>, seed: u64, opportunities: usize, blockspace: usize, network: usize) -> PyResult<(String, Py<PyAny>)> {
    let cfg = trace::GenConfig { seed, opportunities, blockspace_overhead: blockspace, network_overhead: network, ..Default::default() };
    let (records, key) = trace::generate(&cfg);
    Ok((trace::Trace::to_jsonl(&records), to_py(py, &key)?))
}

#[pyfunction]
fn blockspace_reduction(c_a2mm: f64, c_amm: f64, c_arb: f64, c_overhead: f64) -> PyResult<f64> {
    trace::blockspace_reduction(c_a2mm, c_amm, c_arb, c_overhead).map_err(err)
}

fn eth(blocks: usize, seed: u64) -> netsim::NetSimConfig {
    netsim::NetSimConfig { blocks, seed, ..netsim::ethereum() }
}

/// Stale rate of the built-in Ethereum-like network at one bandwidth (Mbit/s).
#[pyfunction]
#[pyo3(signature = (bandwidth_mbps = 70.0, blocks = 10_000, seed = 1))]
fn simulate(py: Python<'_>, bandwidth_mbps: f64, blocks: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let cfg = netsim::NetSimConfig { bandwidth_mbps, ..eth(blocks, seed) };
    to_py(py, &netsim::simulate(&cfg).map_err(err)?)
}

/// Stale-rate curve over several bandwidths plus its quadratic fit.
#[pyfunction]
#[pyo3(signature = (bandwidths, blocks = 10_000, seed = 1))]
fn sweep(py: Python<'_>, bandwidths: Vec<f64>, blocks: usize, seed: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &netsim::sweep_and_fit(&eth(blocks, seed), &bandwidths).map_err(err)?)
}

/// Bandwidth (Mbit/s) left after flooding `amplification` copies of
/// `mbit` of overhead every `interval_s` seconds.
#[pyfunction]
#[pyo3(signature = (base_mbps, overhead_mbit, interval_s, amplification, floor_mbps = 1.0))]
fn flooding_degradation(base_mbps: f64, overhead_mbit: f64, interval_s: f64, amplification: f64, floor_mbps: f64) -> PyResult<f64> {
    netsim::flooding_degradation(base_mbps, overhead_mbit, interval_s, amplification, floor_mbps).map_err(err)
}

#[pymodule]
fn a2mm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pool>()?;
    m.add_function(wrap_pyfunction!(py_route, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_arbitrage, m)?)?;
    m.add_function(wrap_pyfunction!(is_profitable, m)?)?;
    m.add_function(wrap_pyfunction!(n_pool_arbitrage, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(execute, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_trace, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(blockspace_reduction, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(flooding_degradation, m)?)?;
    Ok(())
}
