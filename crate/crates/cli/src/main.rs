//! `provgate` — admin CLI and HTTP gate over the provenance-policy engine.
//!
//! Exit codes: 0 when access was (fully or partially) permitted or the
//! command succeeded, 3 when access was denied or integrity failed, 2 on
//! operational errors.

mod config;
mod server;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use provgate_core::capsule::Integrity;
use provgate_core::evaluator::{AccessRequest, Outcome};
use provgate_core::record::canonical_serialize;
use provgate_core::record::ProvenanceRecord;
use provgate_core::service::GateService;

const EXIT_DENY: u8 = 3;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "provgate", version, about = "Provenance-policy access gate")]
struct Cli {
    /// Directory holding the provenance store and sealed capsules
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,

    /// TOML configuration file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Pin the clock to a fixed instant for reproducible runs
    #[arg(long, global = true, value_name = "ISO8601")]
    fixed_clock: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seal a file into a capsule and register it with the gate
    Upload {
        resource_id: String,
        /// Owning actor id (must already be registered)
        #[arg(long)]
        owner: String,
        /// File whose bytes become the resource payload
        #[arg(long, value_name = "FILE")]
        file: PathBuf,
        /// Context id to log the upload under
        #[arg(long)]
        context: Option<String>,
    },
    /// Request access to a resource
    Access(AccessArgs),
    /// Regenerate policies from the current provenance store
    Regen {
        /// Restrict re-sealing to one resource
        resource_id: Option<String>,
    },
    /// Print a resource's audit trail and accountability report
    Audit { resource_id: String },
    /// Check a resource's capsule integrity
    Verify { resource_id: String },
    /// Manage actor records
    Actor {
        #[command(subcommand)]
        command: ActorCommand,
    },
    /// Manage context records
    Context {
        #[command(subcommand)]
        command: ContextCommand,
    },
    /// Run the HTTP gate
    Serve {
        /// host:port to bind (overrides the config file)
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Args)]
struct AccessArgs {
    resource_id: String,
    #[arg(long)]
    actor: String,
    /// Role the actor claims; checked against the provenance record
    #[arg(long)]
    role: String,
    #[arg(long)]
    context: String,
    /// Requested actions, comma separated (e.g. read,write)
    #[arg(long, value_delimiter = ',', required = true)]
    actions: Vec<String>,
    /// Extra request attribute, `key=value`; repeatable
    #[arg(long = "attr", value_name = "KEY=VALUE")]
    attrs: Vec<String>,
    /// File whose bytes replace the payload when a write is granted
    #[arg(long, value_name = "FILE")]
    write_file: Option<PathBuf>,
    /// Write the returned payload here when a read is granted
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn parse_pairs(raw: &[String]) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for item in raw {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("expected KEY=VALUE, got {item:?}"))?;
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

#[derive(Subcommand)]
enum ActorCommand {
    /// Append an actor record
    Add {
        id: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        role: String,
    },
}

#[derive(Subcommand)]
enum ContextCommand {
    /// Append a context record
    Add {
        id: String,
        #[arg(long)]
        state: String,
        /// Context parameter, `key=value`; repeatable
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let settings = config::resolve(
        cli.config.as_deref(),
        cli.data_dir,
        cli.fixed_clock.as_deref(),
    )?;
    let mut svc = GateService::open(settings.service).map_err(|e| e.to_string())?;

    match cli.command {
        Command::Upload { resource_id, owner, file, context } => {
            let payload = std::fs::read(&file)
                .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
            let context = context.map(|c| c.as_str().into());
            let capsule = svc
                .upload_resource(&resource_id, &payload, &owner.as_str().into(), context.as_ref())
                .map_err(|e| e.to_string())?;
            println!("sealed {} ({} bytes)", capsule.resource_id, payload.len());
            println!("payload digest {}", capsule.payload_digest);
            println!("seal digest    {}", capsule.seal_digest);
            Ok(ExitCode::SUCCESS)
        }
        Command::Access(args) => run_access(&mut svc, args),
        Command::Regen { resource_id } => {
            let attached = svc
                .regenerate_policies(resource_id.as_deref())
                .map_err(|e| e.to_string())?;
            println!("attached {attached} policy document(s)");
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { resource_id } => {
            let (operations, report) = svc.get_audit_trail(&resource_id).map_err(|e| e.to_string())?;
            for op in operations {
                let line = canonical_serialize(&ProvenanceRecord::Operation(op))
                    .map_err(|e| e.to_string())?;
                println!("{line}");
            }
            print!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { resource_id } => match svc.verify_resource(&resource_id).map_err(|e| e.to_string())? {
            Integrity::Intact => {
                println!("intact");
                Ok(ExitCode::SUCCESS)
            }
            Integrity::Tampered(reason) => {
                println!("tampered: {reason}");
                Ok(ExitCode::from(EXIT_DENY))
            }
        },
        Command::Actor { command: ActorCommand::Add { id, name, role } } => {
            let seq = svc.add_actor(&id, &name, &role).map_err(|e| e.to_string())?;
            println!("actor {id} recorded (seq {seq})");
            Ok(ExitCode::SUCCESS)
        }
        Command::Context { command: ContextCommand::Add { id, state, params } } => {
            let params = parse_pairs(&params)?;
            let seq = svc.add_context(&id, &state, params).map_err(|e| e.to_string())?;
            println!("context {id} recorded (seq {seq})");
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { listen } => {
            let listen = listen.unwrap_or(settings.listen);
            let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            runtime.block_on(server::serve(svc, &listen))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_access(svc: &mut GateService, args: AccessArgs) -> Result<ExitCode, String> {
    let new_payload = args
        .write_file
        .as_ref()
        .map(|path| std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display())))
        .transpose()?;
    let request = AccessRequest {
        actor_id: args.actor.as_str().into(),
        claimed_role: args.role,
        context_id: args.context.as_str().into(),
        resource_id: args.resource_id,
        requested_actions: args.actions.into_iter().collect::<BTreeSet<_>>(),
        system_attributes: parse_pairs(&args.attrs)?,
        at: svc.now(),
    };
    let (decision, payload) = svc
        .request_access(&request, new_payload.as_deref())
        .map_err(|e| e.to_string())?;
    let rendered = serde_json::to_string_pretty(&decision).map_err(|e| e.to_string())?;
    println!("{rendered}");
    if let (Some(path), Some(bytes)) = (&args.out, &payload) {
        std::fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        eprintln!("payload written to {}", path.display());
    }
    Ok(match decision.outcome {
        Outcome::Deny => ExitCode::from(EXIT_DENY),
        Outcome::PartialPermit | Outcome::FullPermit => ExitCode::SUCCESS,
    })
}
