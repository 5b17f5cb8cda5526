//! Browser bindings for the interactive demo. All logic lives in
//! [`session`]; these wrappers only shuttle JSON strings across the wasm
//! boundary. Build for the web with:
//!
//! ```text
//! cargo build -p ssv-demo --target wasm32-unknown-unknown --release
//! wasm-bindgen --target web --out-dir crates/wasm-demo/www/pkg \
//!     target/wasm32-unknown-unknown/release/ssv_demo.wasm
//! ```

pub mod session;

use session::DemoSession;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    inner: DemoSession,
}

#[wasm_bindgen]
impl Demo {
    /// Builds a session from a JSON config; empty string = defaults.
    #[wasm_bindgen(constructor)]
    pub fn new(config_json: &str) -> Result<Demo, JsValue> {
        DemoSession::from_json(config_json)
            .map(|inner| Demo { inner })
            .map_err(|e| JsValue::from_str(&e))
    }

    /// Runs `n` training epochs; returns loss history JSON.
    pub fn train_epochs(&mut self, n: usize) -> Result<String, JsValue> {
        self.inner.train_epochs(n).map_err(|e| JsValue::from_str(&e))
    }

    /// 2-D projection of all splits and prototypes plus manifold metrics.
    pub fn snapshot(&self) -> Result<String, JsValue> {
        self.inner.snapshot().map_err(|e| JsValue::from_str(&e))
    }

    /// Surprise vectors per risk tier.
    pub fn probe_ssv(&self) -> Result<String, JsValue> {
        self.inner.probe_ssv().map_err(|e| JsValue::from_str(&e))
    }

    /// Classifier vs k-means vs always-ID risk metrics on a held-out half.
    pub fn evaluate(&self, seed: u64) -> Result<String, JsValue> {
        self.inner.evaluate(seed).map_err(|e| JsValue::from_str(&e))
    }
}
