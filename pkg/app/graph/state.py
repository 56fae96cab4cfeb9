from operator import add
from typing import Annotated, List, Optional

from typing_extensions import TypedDict

from app.config.experiment import ExperimentConfig
from app.models.results import CurvePoint, Engine, PerfCurve, SweepSpec


class SweepState(TypedDict):
    """
    Estado de un barrido completo.

    Attributes:
        spec: El barrido solicitado (variable, malla, motores).
        config: La configuración base con los overrides del barrido aplicados.
        abscissa: Valores de la malla en unidades SI lineales.
        point_configs: Configuración ya validada de cada punto de la malla.
        dump_dir: Carpeta para los volcados de ensayos Monte Carlo, si se pidió.
        points: Resultados de cada (punto, motor); se acumulan con el reductor add.
        curve: La curva final, ordenada por índice de malla.
    """
    spec: SweepSpec
    config: ExperimentConfig
    abscissa: List[float]
    point_configs: List[ExperimentConfig]
    dump_dir: Optional[str]
    points: Annotated[List[CurvePoint], add]
    curve: Optional[PerfCurve]


class PointTask(TypedDict):
    """Trabajo enviado a un nodo evaluador: un motor en un punto de la malla."""
    config: ExperimentConfig
    index: int
    x: float
    engine: Engine
    metrics: List[str]
    dump_dir: Optional[str]
