"""
HVT commands - Exact calculations on finite hidden-variable models.
"""

import json
import sys
from pathlib import Path
from typing import List, Optional

import typer

# Add scripts directory to path for imports
scripts_dir = Path(__file__).parent.parent
if str(scripts_dir) not in sys.path:
    sys.path.insert(0, str(scripts_dir))

from bellstats import bound_check
from commands.common import EXIT_OK, command_errors
from hvt_toy import (
    STANDARD_ANGLES,
    ProbabilityTable,
    chsh_of_model,
    compose_lambda,
    independence_violation,
    load_model,
    load_table,
    local_deterministic_model,
    predict_outcomes,
    save_table,
    singlet_model,
    standard_singlet_chsh,
)
from rich_utils import console, print_exact_chsh, print_info, print_success, print_table

app = typer.Typer(name="hvt", help="Exact hidden-variable toy models")


def _print_probability_table(table: ProbabilityTable, title: str) -> None:
    columns = ["condition"] + [str(o) for o in table.outcomes]
    rows = [[str(c)] + [f"{p:.6f}" for p in table.probs[i]] for i, c in enumerate(table.conditions)]
    print_table(title, columns, rows)


def _print_verdict(result) -> None:
    verdict = bound_check(result)
    console.print(f"Verdict: [bold]{verdict.verdict}[/bold] (|S| - 2 = {verdict.margin:+.10f})")


@app.command()
def singlet(
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the model JSON here"),
):
    """
    Exact CHSH value of the contextual singlet model at the standard angles.

    Example:
        hydrobell hvt singlet
    """
    with command_errors():
        result = standard_singlet_chsh()
        if out is not None:
            angles = STANDARD_ANGLES
            model = singlet_model((angles["a"], angles["a_prime"]), (angles["b"], angles["b_prime"]))
            from artifacts import write_json_atomic

            write_json_atomic(out, model.to_json())
            print_success(f"Model written to {out}")
    print_exact_chsh(result, title="Singlet model")
    _print_verdict(result)
    raise typer.Exit(EXIT_OK)


@app.command()
def local(
    weights: Optional[List[float]] = typer.Option(None, "--weight", help="Strategy weight (repeat 16 times)"),
):
    """
    Exact CHSH value of the settings-independent deterministic model at the standard angles.

    Example:
        hydrobell hvt local
    """
    angles = STANDARD_ANGLES
    with command_errors():
        model = local_deterministic_model(
            (angles["a"], angles["a_prime"]), (angles["b"], angles["b_prime"]), weights or None
        )
        result = chsh_of_model(model, angles["a"], angles["a_prime"], angles["b"], angles["b_prime"])
    print_exact_chsh(result, title="Local deterministic model")
    _print_verdict(result)
    raise typer.Exit(EXIT_OK)


@app.command()
def compose(
    kernel: Path = typer.Option(..., "--kernel", help="P(lambda | a, b, s) table"),
    mixing: Path = typer.Option(..., "--mixing", help="P(s | a, b) table"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the composed table here"),
):
    """
    Compose P(lambda | a, b) by summing the kernel over the intermediate variable.

    Example:
        hydrobell hvt compose --kernel kernel.json --mixing mixing.json -o lambda.json
    """
    with command_errors():
        composed = compose_lambda(load_table(kernel), load_table(mixing))
        if out is not None:
            save_table(out, composed)
    _print_probability_table(composed, "P(lambda | a, b)")
    if out is not None:
        print_success(f"Table written to {out}")
    raise typer.Exit(EXIT_OK)


@app.command()
def predict(
    model: Path = typer.Option(..., "--model", "-m", help="Model JSON (lambda_table and response)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the predicted table here"),
):
    """
    Predicted joint outcome distribution P(x, y | a, b) of a model.

    Example:
        hydrobell hvt predict --model singlet.json
    """
    with command_errors():
        predicted = predict_outcomes(load_model(model))
        if out is not None:
            save_table(out, predicted)
    _print_probability_table(predicted, "P(x, y | a, b)")
    raise typer.Exit(EXIT_OK)


@app.command()
def independence(
    table: Path = typer.Option(..., "--table", "-t", help="P(lambda | a, b) table"),
    weights: Optional[List[float]] = typer.Option(None, "--weight", help="Settings weight, one per condition"),
):
    """
    Largest total variation distance of P(lambda | a, b) from the settings-averaged P(lambda).

    Zero means measurement independence holds.

    Example:
        hydrobell hvt independence --table lambda.json
    """
    with command_errors():
        violation = independence_violation(load_table(table), weights or None)
    if violation == 0.0:
        print_success("Measurement independence holds")
    else:
        print_info(f"Measurement independence violated: max TV distance {violation:.6f}")
    console.print(json.dumps({"independence_violation": violation}))
    raise typer.Exit(EXIT_OK)


@app.command()
def chsh(
    model: Path = typer.Option(..., "--model", "-m", help="Model JSON (lambda_table and response)"),
    a: float = typer.Option(STANDARD_ANGLES["a"], "--a", help="Setting a"),
    a_prime: float = typer.Option(STANDARD_ANGLES["a_prime"], "--a-prime", help="Setting a'"),
    b: float = typer.Option(STANDARD_ANGLES["b"], "--b", help="Setting b"),
    b_prime: float = typer.Option(STANDARD_ANGLES["b_prime"], "--b-prime", help="Setting b'"),
):
    """
    Exact CHSH value of a model file.

    Example:
        hydrobell hvt chsh --model singlet.json
    """
    with command_errors():
        result = chsh_of_model(load_model(model), a, a_prime, b, b_prime)
    print_exact_chsh(result)
    _print_verdict(result)
    raise typer.Exit(EXIT_OK)
