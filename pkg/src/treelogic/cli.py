"""Command-line front end.

Reads a problem file (predicate definitions plus a goal formula),
expands it into a plain formula, decides satisfiability, and reports
the outcome.  A satisfiable goal additionally yields an annotated XML
witness that is validated against every schema the problem mentioned,
so a compatibility question comes back with a concrete document that
one schema accepts and the other rejects.

Exit status: 0 when the goal is unsatisfiable, 1 when a witness was
found, 2 when the run failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from . import formulas as fm
from . import predicates as pred
from . import solver
from . import trees
from .errors import ResourceLimit, TreelogicError
from .validate import validate

FORMATS = ("human", "xml", "json")


@dataclass
class RunConfig:
    """Everything one invocation depends on."""

    spec_path: str
    attributes: bool = False        # attribute reasoning is opt-in
    budget: int = solver.DEFAULT_BUDGET
    fmt: str = "human"
    schema_dir: str | None = None   # default: directory of the spec file

    def resolved_schema_dir(self) -> str:
        if self.schema_dir is not None:
            return self.schema_dir
        return os.path.dirname(os.path.abspath(self.spec_path))


@dataclass
class Diagnostic:
    """Result of validating the witness against one mentioned schema."""

    schema: str
    root: str
    violation: object = None        # validate.Violation | None

    @property
    def ok(self) -> bool:
        return self.violation is None


@dataclass
class RunReport:
    verdict: str                    # "sat" | "unsat"
    witness: object = None          # trees.Document | None
    documents: list = field(default_factory=list)
    annotation: object = None       # trees.Annotation | None
    xml: str | None = None
    diagnostics: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)


class RunError(Exception):
    """A pipeline phase failed; carries the phase name and the cause."""

    def __init__(self, phase: str, error: Exception):
        self.phase = phase
        self.error = error
        super().__init__(f"{phase}: {error}")


@contextmanager
def _phase(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except (TreelogicError, OSError) as err:
        raise RunError(name, err) from err
    finally:
        timings[name] = time.perf_counter() - start


def annotate(witness: trees.BinaryTree, goal: fm.Formula,
             documents: list | None = None) -> trees.Annotation:
    """Locate the context and target nodes of a witness.

    The target is the node where the goal formula holds; the context is
    the first node carrying the # mark, present only when the goal
    mentions # at all.  Returns an Annotation over the unranked
    documents, which map one-to-one onto the binary nodes in walk
    order.
    """
    if documents is None:
        documents = trees.binary_to_documents(witness)
    flat = []
    for doc in documents:
        flat.extend(doc.root.walk())
    want_context = fm.contains_kind(goal, fm.CTX)
    context = target = None
    for bnode, dnode in zip(witness.walk(), flat):
        if context is None and want_context \
                and trees.CONTEXT_PROP in bnode.props:
            context = dnode
        if target is None and bnode.marked:
            target = dnode
    return trees.Annotation(context, target)


def run(config: RunConfig) -> RunReport:
    """Run the full pipeline on one problem file."""
    timings: dict = {}

    with _phase("read", timings):
        with open(config.spec_path, encoding="utf-8") as handle:
            text = handle.read()

    with _phase("parse", timings):
        spec = pred.parse_spec(text)

    env = pred.Environment(schema_dir=config.resolved_schema_dir(),
                           with_attributes=config.attributes)
    with _phase("expand", timings):
        goal = pred.expand(spec, env)

    with _phase("resolve", timings):
        universe = set(env.attr_universe)
        universe.update(fm.collect_attribute_names(goal))
        goal = fm.resolve_placeholders(goal, sorted(universe))

    with _phase("normalize", timings):
        normal = fm.normalize(goal)

    with _phase("cycle-check", timings):
        fm.check_cycle_free(normal)

    with _phase("solve", timings):
        result = solver.satisfiable(goal, budget=config.budget)

    if not result:
        return RunReport(verdict="unsat", timings=timings,
                         stats=dict(result.stats))

    with _phase("witness", timings):
        documents = trees.binary_to_documents(result.witness)
        ann = annotate(result.witness, goal, documents)
        xml = trees.serialize_documents(documents, ann)
        diagnostics = []
        for (path, root), (ttype, _) in sorted(env.schemas.items()):
            found = validate(documents[0], ttype,
                             check_attributes=config.attributes)
            diagnostics.append(Diagnostic(os.path.basename(path), root,
                                          found))

    return RunReport(verdict="sat", witness=documents[0],
                     documents=documents, annotation=ann, xml=xml,
                     diagnostics=diagnostics, timings=timings,
                     stats=dict(result.stats))


def _render_human(report: RunReport) -> str:
    lines = []
    if report.verdict == "sat":
        lines.append("satisfiable: a witness document exists")
        lines.append("")
        lines.append(report.xml.rstrip("\n"))
        if report.diagnostics:
            lines.append("")
            lines.append("witness validation:")
            for diag in report.diagnostics:
                where = f"{diag.schema} (root {diag.root})"
                if diag.ok:
                    lines.append(f"  valid    {where}")
                else:
                    lines.append(f"  invalid  {where}: {diag.violation}")
    else:
        lines.append("unsatisfiable: no tree satisfies the goal")
    total = sum(report.timings.values())
    shown = " ".join(f"{name} {secs:.3f}s"
                     for name, secs in report.timings.items())
    lines.append("")
    lines.append(f"timings: {shown} (total {total:.3f}s)")
    return "\n".join(lines) + "\n"


def _render_json(report: RunReport) -> str:
    payload = {
        "verdict": ("satisfiable" if report.verdict == "sat"
                    else "unsatisfiable"),
        "witness": report.xml,
        "diagnostics": [
            {"schema": d.schema, "root": d.root, "valid": d.ok,
             "message": None if d.ok else str(d.violation)}
            for d in report.diagnostics
        ],
        "timings": {k: round(v, 6) for k, v in report.timings.items()},
        "stats": report.stats,
    }
    return json.dumps(payload, indent=2) + "\n"


def render(report: RunReport, fmt: str) -> str:
    if fmt == "xml":
        return report.xml or ""
    if fmt == "json":
        return _render_json(report)
    return _render_human(report)


def _parse_args(argv) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="treelogic",
        description="Decide satisfiability of tree-logic problem files "
                    "and produce annotated XML witnesses.")
    parser.add_argument("spec",
                        help="problem file: predicate definitions "
                             "separated by ';', ending with a goal formula")
    parser.add_argument("--attributes", action="store_true",
                        help="take attribute constraints into account "
                             "(default: structure only)")
    parser.add_argument("--budget", type=int,
                        default=solver.DEFAULT_BUDGET, metavar="N",
                        help="node-type budget before the solver gives up")
    parser.add_argument("--format", dest="fmt", choices=FORMATS,
                        default="human",
                        help="report format (default: human)")
    parser.add_argument("--schema-dir", default=None, metavar="DIR",
                        help="directory schema file names are resolved "
                             "against (default: the spec file's directory)")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    # tolerate the single-dash spelling of --attributes
    argv = ["--attributes" if a == "-attributes" else a for a in argv]
    args = _parse_args(argv)
    config = RunConfig(spec_path=args.spec, attributes=args.attributes,
                       budget=args.budget, fmt=args.fmt,
                       schema_dir=args.schema_dir)
    try:
        report = run(config)
    except RunError as err:
        if isinstance(err.error, ResourceLimit):
            print(f"treelogic: budget exhausted during {err.phase}: "
                  f"{err.error}", file=sys.stderr)
        else:
            print(f"treelogic: error during {err.phase}: {err.error}",
                  file=sys.stderr)
        return 2
    out = render(report, config.fmt)
    if out:
        sys.stdout.write(out)
    if config.fmt == "xml" and report.verdict == "unsat":
        print("unsatisfiable", file=sys.stderr)
    return 1 if report.verdict == "sat" else 0


if __name__ == "__main__":
    sys.exit(main())
