import logging
from typing import Any, Dict, List

from langgraph.graph import END, StateGraph
from langgraph.types import Send

from app.config.settings import SWEEP_MAX_WORKERS
from app.graph.state import PointTask, SweepState
from app.services.experiment_service import build_curve, evaluate_point

logger = logging.getLogger(__name__)

_sweep_graph = None


def plan_sweep_node(state: SweepState) -> Dict[str, Any]:
    spec = state["spec"]
    logger.info(f"[Sweep] Planificando '{spec.name}': {len(state['abscissa'])} puntos x {len(spec.engines)} motores")
    return {}


def map_points(state: SweepState) -> List[Send]:
    """Un Send por cada par (punto de malla, motor)."""
    spec = state["spec"]
    return [
        Send("evaluate_point", {
            "config": config,
            "index": index,
            "x": x,
            "engine": engine,
            "metrics": list(spec.metrics),
            "dump_dir": state.get("dump_dir") if engine == "monte_carlo" else None,
        })
        for index, (x, config) in enumerate(zip(state["abscissa"], state["point_configs"]))
        for engine in spec.engines
    ]


def evaluate_point_node(task: PointTask) -> Dict[str, Any]:
    logger.info(f"[Sweep] Evaluando punto {task['index']} (x={task['x']:g}) con {task['engine']}")
    try:
        point = evaluate_point(
            task["config"], task["index"], task["x"], task["engine"], task["metrics"], task["dump_dir"]
        )
    except Exception as e:
        logger.error(f"Error evaluando el punto {task['index']} con {task['engine']}: {e}")
        raise
    return {"points": [point]}


def collect_node(state: SweepState) -> Dict[str, Any]:
    """Ordena los resultados por índice de malla y arma la curva."""
    curve = build_curve(state["spec"], state["config"], state["abscissa"], state["points"])
    infeasible = sum(not p.feasible for p in curve.points)
    logger.info(f"[Sweep] Curva '{curve.name}' completa: {len(curve.points)} registros, {infeasible} no factibles")
    return {"curve": curve}


def create_sweep_graph():
    """Grafo map-reduce: plan -> evaluación en paralelo por punto -> colector."""
    workflow = StateGraph(SweepState)

    workflow.add_node("plan_sweep", plan_sweep_node)
    workflow.add_node("evaluate_point", evaluate_point_node)
    workflow.add_node("collect", collect_node)

    workflow.set_entry_point("plan_sweep")
    workflow.add_conditional_edges("plan_sweep", map_points, ["evaluate_point"])
    workflow.add_edge("evaluate_point", "collect")
    workflow.add_edge("collect", END)

    sweep_graph = workflow.compile()
    logger.info("Grafo de barridos compilado exitosamente")
    return sweep_graph


def get_sweep_graph():
    global _sweep_graph
    if _sweep_graph is None:
        _sweep_graph = create_sweep_graph()
    return _sweep_graph


def invoke_sweep(initial_state: Dict[str, Any]) -> Dict[str, Any]:
    return get_sweep_graph().invoke(initial_state, config={"max_concurrency": SWEEP_MAX_WORKERS})
