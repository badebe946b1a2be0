import logging
from pathlib import Path

from gaugeflow.config import RunConfig
from gaugeflow.suites import SuiteResult
from gaugeflow.utils.hashing import config_hash
from gaugeflow.utils.io import sidecar, write_csv, write_field, write_json, write_jsonl

logger = logging.getLogger(__name__)


def emit_report(results: list[SuiteResult], config: RunConfig, version: str) -> list[Path]:
    """Write every table, record stream, the summary and the manifest under config.out.
    The content depends only on the config and the results, so reruns are byte-identical."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for res in results:
        for name, rows in res.tables.items():
            write_csv(out / name, rows)
            written.append(out / name)
        for name, records in res.records.items():
            write_jsonl(out / name, records)
            written.append(out / name)
        for name, f in res.fields.items():
            write_field(out / name, f)
            written += [out / name, sidecar(out / name)]
    write_json(out / "summary.json", {res.name: res.summary for res in results})
    written.append(out / "summary.json")
    manifest = {
        "config_hash": config_hash(config.to_dict()),
        "seed": config.seed,
        "subcommand": config.subcommand,
        "version": version,
        "passed": all(res.passed for res in results),
        "suites": {res.name: {"passed": res.passed, "checks": res.checks} for res in results},
        "files": sorted(p.name for p in written),
    }
    write_json(out / "manifest.json", manifest)
    written.append(out / "manifest.json")
    logger.info("wrote %d files to %s", len(written), out)
    return written
