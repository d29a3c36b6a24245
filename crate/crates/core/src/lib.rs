//! Multi-personality configuration and deployment of component-based
//! applications.
//!
//! A description written in one of the supported languages is parsed into a
//! platform-independent [`model::Configuration`], compiled by the
//! [`planner`] into a graph of elementary deployment tasks, and run by the
//! [`engine`] against one of the simulated platforms in [`backends`].
//!
//! ```
//! use polydeploy::backends::{deploy, MockRuntime};
//! use polydeploy::engine::{EngineConfig, Outcome};
//! use polydeploy::{frontends, planner};
//!
//! let config = frontends::parse_native(
//!     "type Server { provides s: IService }
//!      type Client { requires s: IService }
//!      instance srv: Server
//!      instance cli: Client
//!      bind cli.s -> srv.s",
//! )
//! .unwrap();
//! let runtime = MockRuntime::flat(&config);
//! let graph = planner::compile(&config, &runtime.capabilities()).unwrap();
//! let trace = deploy(&graph, &runtime, &EngineConfig::new(2));
//! assert_eq!(trace.outcome, Outcome::Completed);
//! assert!(runtime.snapshot().instances["cli"].started);
//! ```

pub mod backends;
pub mod cli;
pub mod engine;
pub mod frontends;
pub mod model;
pub mod planner;
