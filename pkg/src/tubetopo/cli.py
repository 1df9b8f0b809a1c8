"""Command-line entry point.

Exit codes: 0 success, 1 usage or config error, 2 IO error, 3 data validation error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from tubetopo.config import RunConfig, load_config
from tubetopo.datakit import (
    DEFAULT_TEMPLATE,
    RecordStore,
    dumps_line,
    emit_prompt,
    read_predictions,
    read_records,
)
from tubetopo.errors import ConfigError, DataError, TemplateError
from tubetopo.reward import render_answer
from tubetopo.runs import check_ids, evaluate_lines, score_lines

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 1, 2, 3
SERVER_BATCH = 256


def _config(path, sets, **scalars) -> RunConfig:
    return load_config(path).override(list(sets)).with_scalars(**scalars)


def _write_lines(lines, out) -> int:
    n = 0
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(dumps_line(line) + "\n")
            n += 1
    return n


config_opt = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML or JSON run config.")
set_opt = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="Override a config value, e.g. reward.phi=coco.")


@click.group()
@click.version_option("0.1.0", prog_name="tubetopo")
def cli():
    """Synthesize topological-error data, score responses, evaluate detections."""


@cli.command()
@click.option("--source", default=None, help="'synthetic' or a directory of masks.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output JSONL.")
@click.option("--count", required=True, type=click.IntRange(min=0))
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@config_opt
@set_opt
def generate(source, out, count, seed, workers, config_path, sets):
    """Write COUNT corrupted samples plus a <stem>.meta.json sidecar."""
    from tubetopo.forge import DirectorySource, SyntheticSource, generate as run

    cfg = _config(config_path, sets, seed=seed, workers=workers, source=source)
    if cfg.source == "synthetic":
        src = SyntheticSource(cfg.synth)
    else:
        if not Path(cfg.source).is_dir():
            raise FileNotFoundError(f"source directory not found: {cfg.source}")
        src = DirectorySource.scan(cfg.source)
    echo = cfg.to_dict()
    del echo["workers"]  # output never depends on it
    meta = run(src, out, count, cfg.seed, cfg.forge, cfg.workers, extra_meta={"config": echo})
    tallies = meta["tallies"]
    click.echo(f"wrote {count} samples to {out} ({tallies['negatives']} negative)", err=True)
    click.echo(f"emitted: {json.dumps(tallies['emitted'])}", err=True)


def _score_remote(server: str, store: RecordStore, predictions, timeout: float):
    import httpx

    check_ids(store, predictions)
    url = server.rstrip("/") + "/v1/reward/batch"
    with httpx.Client(timeout=timeout) as client:
        for start in range(0, len(predictions), SERVER_BATCH):
            chunk = predictions[start : start + SERVER_BATCH]
            items = [
                {"id": p.id, "response": p.response if p.response is not None else render_answer(p.prediction)}
                for p in chunk
            ]
            r = client.post(url, json={"items": items})
            if r.status_code in (400, 404):
                raise DataError(f"server rejected batch: {r.text}")
            r.raise_for_status()
            for p, res in zip(chunk, r.json()["results"]):
                yield {"id": p.id, **res}


@cli.command()
@click.option("--records", required=True, type=click.Path(dir_okay=False))
@click.option("--responses", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--server", default=None, help="Score through a running service at this base URL.")
@click.option("--timeout", type=float, default=60.0, show_default=True, help="HTTP timeout with --server.")
@config_opt
@set_opt
def score(records, responses, out, server, timeout, config_path, sets):
    """Write one reward breakdown per response line."""
    cfg = _config(config_path, sets)
    store = RecordStore.open(records)
    predictions = read_predictions(responses)
    if server:
        lines = _score_remote(server, store, predictions, timeout)
    else:
        lines = score_lines(store, predictions, cfg.reward)
    n = _write_lines(lines, out)
    click.echo(f"scored {n} responses into {out}", err=True)


@cli.command()
@click.option("--records", required=True, type=click.Path(dir_okay=False))
@click.option("--responses", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def evaluate(records, responses, out):
    """Write the detection metrics report as one flat JSON object."""
    report = evaluate_lines(read_records(records), read_predictions(responses))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    click.echo(
        f"F1@0.50 {report['f1@0.50']:.4f}  aF1 {report['aF1']:.4f}  over {report['n_samples']} samples", err=True
    )


@cli.command()
@click.option("--records", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--template", type=click.Path(dir_okay=False), default=None, help="string.Template file.")
def prompts(records, out, template):
    """Write {id, prompt, answer} lines for supervised fine-tuning data."""
    text = Path(template).read_text(encoding="utf-8") if template else DEFAULT_TEMPLATE
    lines = (
        {"id": r.id, "prompt": emit_prompt(r, text), "answer": render_answer(r.annotations)}
        for r in read_records(records)
    )
    n = _write_lines(lines, out)
    click.echo(f"wrote {n} prompts to {out}", err=True)


def _addr(value: str) -> tuple[str, int]:
    host, sep, port = value.rpartition(":")
    if not sep or not port.isdigit():
        raise click.BadParameter(f"expected HOST:PORT, got {value!r}", param_hint="--addr")
    return host or "127.0.0.1", int(port)


@cli.command()
@click.option("--addr", default="127.0.0.1:8000", show_default=True, help="HOST:PORT to bind.")
@click.option("--records", type=click.Path(dir_okay=False), default=None, help="JSONL whose ids are scorable.")
@config_opt
@set_opt
def serve(addr, records, config_path, sets):
    """Run the HTTP reward service."""
    import uvicorn

    from tubetopo.service import create_app

    host, port = _addr(addr)
    app = create_app(records, _config(config_path, sets))
    uvicorn.run(app, host=host, port=port, log_level="info")


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="tubetopo", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except (ConfigError, TemplateError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return EXIT_IO
    except Exception as exc:
        if type(exc).__module__.startswith("httpx"):
            click.echo(f"io error: {exc}", err=True)
            return EXIT_IO
        raise
    return rv if isinstance(rv, int) else EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
