"""Command line: ``compose`` runs the whole pipeline non-interactively;
``serve`` starts the HTTP session service."""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys
from pathlib import Path

from .errors import AuthFailed, PortInUse, StorydeckError
from .gateway import gateway_from_flag
from .model import KnowledgeDoc
from .sessions import SessionManager

logger = logging.getLogger(__name__)


def _parse_weights(text: str) -> tuple[float, float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("weights must be four comma-separated numbers s,f,h,i")
    try:
        w = tuple(float(p) for p in parts)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    return w  # type: ignore[return-value]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storydeck", description="Compose slide-deck data stories from charts."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    comp = sub.add_parser("compose", help="batch-compose a deck from charts")
    comp.add_argument("--data", required=True, help="CSV dataset file")
    comp.add_argument("--knowledge", action="append", default=[], help="domain knowledge text file (repeatable)")
    comp.add_argument("--intent", default="", help="narrative intent text")
    comp.add_argument("--charts", action="append", default=[], required=True, help="chart spec JSON file (repeatable)")
    comp.add_argument("--select", type=int, default=1, help="facts to select per chart")
    comp.add_argument("--top-k", type=int, default=4, help="fact candidates per chart")
    comp.add_argument("--max-facts-per-slide", type=int, default=3)
    comp.add_argument("--weights", type=_parse_weights, default=(1.0, 1.0, 1.0, 1.0),
                      help="meta score weights s,f,h,i (default 1,1,1,1)")
    comp.add_argument("--llm", default=None, help="mock:<script-file> or http:<base-url>")
    comp.add_argument("--format", default="markdown-slides",
                      choices=("markdown-slides", "html", "structured"))
    comp.add_argument("--theme", default="plain")
    comp.add_argument("--out", required=True, help="output document path")
    comp.add_argument("--transcript", default=None, help="write the LLM transcript (JSONL) here")

    srv = sub.add_parser("serve", help="run the HTTP session service")
    srv.add_argument("--port", type=int, default=8787)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--llm", default=None, help="mock:<script-file> or http:<base-url>")
    srv.add_argument("--static-dir", default=None, help="serve UI assets from this directory")
    srv.add_argument("--snapshot-dir", default=None, help="persist session snapshots here")
    srv.add_argument("--top-k", type=int, default=4)
    srv.add_argument("--max-facts-per-slide", type=int, default=3)
    srv.add_argument("--weights", type=_parse_weights, default=(1.0, 1.0, 1.0, 1.0))
    return parser


def _best_suggestion_for(fact_id: str, suggestions: list[dict]) -> str | None:
    involved = [
        s for s in suggestions if fact_id in (s["fact_a"], s["fact_b"]) and s["status"] == "suggested"
    ]
    if not involved:
        return None
    involved.sort(key=lambda s: (-s["score"], s["id"]))
    return involved[0]["id"]


def compose(args) -> int:
    gateway = gateway_from_flag(args.llm)
    manager = SessionManager(
        gateway=gateway,
        top_k=args.top_k,
        max_facts_per_slide=args.max_facts_per_slide,
        weights=args.weights,
    )
    docs = []
    for i, path in enumerate(args.knowledge):
        p = Path(path)
        docs.append(KnowledgeDoc(doc_id=f"k{i + 1}", title=p.stem, body=p.read_text(encoding="utf-8")))
    data_path = Path(args.data)
    info = manager.create_session(
        data_path.read_bytes(), knowledge_docs=docs, intent=args.intent,
        dataset_name=data_path.stem,
    )
    sid = info["session_id"]

    mined = 0
    selected = 0
    for chart_path in args.charts:
        result = manager.submit_chart(sid, Path(chart_path).read_text(encoding="utf-8"))
        mined += len(result["facts"])
        for fact in result["facts"][: args.select]:
            relation_id = _best_suggestion_for(fact["id"], result["suggestions"])
            manager.select_fact(sid, fact["id"], relation_id)
            selected += 1

    doc = manager.export(sid, format=args.format, theme=args.theme)
    out_path = Path(args.out)
    out_path.write_text(doc.content, encoding="utf-8")

    state = manager.get_state(sid)
    if args.transcript:
        Path(args.transcript).write_text(manager.transcript_jsonl(sid), encoding="utf-8")

    stats = state["suggestion_stats"]
    placements = state["placements"]
    deck = state["deck"]
    print(f"dataset: {args.data} ({state['dataset']['row_count']} rows)")
    print(f"charts processed: {len(args.charts)}")
    print(f"facts mined: {mined}, selected: {selected}")
    print(
        f"meta suggestions: made {stats['made']}, verified {stats['verified']}, "
        f"accepted {stats['accepted']}"
    )
    print(f"placements: llm {placements['llm']}, fallback {placements['fallback']}")
    print(f"deck: {len(deck['slides'])} slide(s), "
          f"{sum(len(s['entries']) for s in deck['slides'])} fact(s) -> {args.out}")
    return 0


def _check_port(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as e:
        raise PortInUse(f"cannot bind {host}:{port}: {e}") from e
    finally:
        probe.close()


def serve(args) -> int:
    import uvicorn

    from .service import create_app

    gateway = gateway_from_flag(args.llm)
    _check_port(args.host, args.port)
    manager = SessionManager(
        gateway=gateway,
        top_k=args.top_k,
        max_facts_per_slide=args.max_facts_per_slide,
        weights=args.weights,
        snapshot_dir=args.snapshot_dir,
    )
    app = create_app(manager, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compose":
            return compose(args)
        return serve(args)
    except (AuthFailed, PortInUse) as e:
        print(f"error [{e.code}]: {e.message}", file=sys.stderr)
        return 2
    except StorydeckError as e:
        print(f"error [{e.code}]: {e.message}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
