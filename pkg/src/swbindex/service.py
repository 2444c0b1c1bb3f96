"""HTTP service over one data directory.

Hosts the annotation API consumed by the coder UI plus endpoints for every
pipeline stage, so the command line can stay a thin client. Errors are
always ``{"error": code, "message": text}``.
"""

from __future__ import annotations

import os
from datetime import date
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import annotation, corpus, pipeline
from . import index as index_mod
from . import sem
from .annotation import AnnotationError, AnnotationSession, EmptyPoolError, LabelStore, StaleCursorError
from .corpus import DIMENSIONS, CorpusStore
from .estimator import EstimatorError
from .pipeline import PipelineError, RunConfig


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


# -- request / response models ------------------------------------------------


class IngestRequest(BaseModel):
    source_path: str
    format: str = "jsonl"
    lang: str
    country: str
    corpus: str = "default"


class IngestResponse(BaseModel):
    accepted: int
    rejected: int
    rejects_by_reason: dict[str, int]
    corpus: str


class SelectRequest(BaseModel):
    corpus: str = "default"
    dimension: str
    keywords_path: str | None = None
    limit: int = 500
    seed: int | None = None


class SelectResponse(BaseModel):
    dimension: str
    count: int
    path: str


class SessionRequest(BaseModel):
    coder_id: str
    dimension_pool: str = "all"
    seed: int = 0
    corpus: str = "default"


class SessionResponse(BaseModel):
    session_id: str
    coder_id: str
    queue_length: int


class NextResponse(BaseModel):
    post_id: str | None
    text: str | None
    remaining: int


class LabelsRequest(BaseModel):
    post_id: str
    labels: dict[str, str] = Field(default_factory=dict)


class LabelsResponse(BaseModel):
    ok: bool
    cursor: int


class EstimateRequest(BaseModel):
    corpus: str = "default"
    dimensions: list[str] | None = None
    training_dir: str | None = None
    ridge: float | None = None
    alpha: float = 0.5
    max_features: int = 2000
    bootstrap: int = 0
    seed: int = 0
    script_mode: str = "unspaced"
    workers: int = 1


class EstimateResponse(BaseModel):
    reports: int
    paths: list[str]


class IndexRequest(BaseModel):
    corpus: str = "default"
    seed: int = 0


class IndexResponse(BaseModel):
    path: str
    rows: int


class AggregateRequest(BaseModel):
    corpus: str = "default"
    period: str = "year"
    components_csv: str | None = None
    seed: int = 0


class AggregateResponse(BaseModel):
    table: str
    csv_path: str
    text_path: str


class TrendRequest(BaseModel):
    corpus: str = "default"
    column: str = "swb"
    bandwidth: float = 60.0
    seed: int = 0


class TrendResponse(BaseModel):
    path: str
    points: int


class CorrelationRequest(BaseModel):
    table_path: str | None = None
    pairs: list[str] | None = None  # entries "colA:colB"


class CorrelationRow(BaseModel):
    a: str
    b: str
    r: float
    n: int


class CorrelationResponse(BaseModel):
    rows: list[CorrelationRow]
    table: str


class SemFitRequest(BaseModel):
    panel_csv: str
    sidecar: str | None = None
    model_file: str | None = None
    start: str | None = None  # ISO month
    end: str | None = None


class SemFitResponse(BaseModel):
    report: str
    n: int
    converged: bool
    dropped_rows: int
    json_path: str
    text_path: str


class ReportRequest(BaseModel):
    corpus: str = "default"
    seed: int = 0


class ReportResponse(BaseModel):
    path: str


# -- application --------------------------------------------------------------


def create_app(data_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="swbindex", version="0.1.0")
    app.state.data_dir = data_dir
    app.state.labels = LabelStore(data_dir / "labels.jsonl")
    app.state.sessions: dict[str, AnnotationSession] = {}

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.code, "message": exc.message})

    def config_for(corpus_id: str, seed: int = 0, **overrides) -> RunConfig:
        return RunConfig(data_dir=str(data_dir), corpus=corpus_id, seed=seed, **overrides)

    @app.get("/api/health")
    def health():
        return {"ok": True}

    # -- corpus / pipeline -----------------------------------------------------

    @app.post("/api/corpus/ingest", response_model=IngestResponse)
    def ingest(req: IngestRequest):
        store = CorpusStore(data_dir / "corpus" / req.corpus)
        try:
            result = corpus.ingest_posts(req.source_path, req.format, req.lang, req.country, store)
        except corpus.CorpusError as exc:
            raise ApiError(400, "ingest_error", str(exc)) from exc
        return IngestResponse(
            accepted=result.accepted,
            rejected=result.rejected,
            rejects_by_reason=result.rejects_by_reason,
            corpus=req.corpus,
        )

    @app.post("/api/candidates/select", response_model=SelectResponse)
    def select(req: SelectRequest):
        if req.dimension not in DIMENSIONS:
            raise ApiError(400, "bad_dimension", f"unknown dimension {req.dimension!r}")
        config = config_for(req.corpus, seed=req.seed if req.seed is not None else 0)
        try:
            path = pipeline.select_candidates(config, req.dimension, req.keywords_path, req.limit)
        except (PipelineError, corpus.CorpusError, ValueError) as exc:
            raise ApiError(400, "select_error", str(exc)) from exc
        count = sum(1 for line in path.read_text(encoding="utf-8").splitlines() if line.strip())
        return SelectResponse(dimension=req.dimension, count=count, path=str(path))

    @app.post("/api/estimate", response_model=EstimateResponse)
    def estimate(req: EstimateRequest):
        config = config_for(
            req.corpus,
            seed=req.seed,
            ridge=req.ridge,
            alpha=req.alpha,
            max_features=req.max_features,
            bootstrap=req.bootstrap,
            script_mode=req.script_mode,
            workers=req.workers,
        )
        try:
            paths = pipeline.run_estimates(config, req.dimensions, req.training_dir)
        except (PipelineError, EstimatorError, AnnotationError) as exc:
            raise ApiError(400, "estimate_error", str(exc)) from exc
        return EstimateResponse(reports=len(paths), paths=[str(p) for p in paths])

    @app.post("/api/index/build", response_model=IndexResponse)
    def build_index(req: IndexRequest):
        config = config_for(req.corpus, seed=req.seed)
        try:
            path = pipeline.write_index(config)
        except PipelineError as exc:
            raise ApiError(400, "index_error", str(exc)) from exc
        rows = len(path.read_text(encoding="utf-8").splitlines()) - 1
        return IndexResponse(path=str(path), rows=rows)

    @app.post("/api/index/aggregate", response_model=AggregateResponse)
    def aggregate(req: AggregateRequest):
        config = config_for(req.corpus, seed=req.seed)
        try:
            if req.components_csv is not None:
                series = index_mod.read_components_csv(Path(req.components_csv).read_text(encoding="utf-8"))
            else:
                series = pipeline.load_index_series(config)
            stats = index_mod.aggregate(series, req.period)
        except (PipelineError, index_mod.IndexError_, OSError) as exc:
            raise ApiError(400, "aggregate_error", str(exc)) from exc
        table = index_mod.render_aggregate_table(stats, req.period)
        csv_text = index_mod.render_aggregate_csv(stats, req.period)
        base = config.corpus_dir if req.components_csv is None else data_dir
        csv_path = base / f"aggregate_{req.period}.csv"
        text_path = base / f"aggregate_{req.period}.txt"
        pipeline.write_artifact(csv_path, csv_text, config)
        pipeline.write_artifact(text_path, table, config)
        return AggregateResponse(table=table, csv_path=str(csv_path), text_path=str(text_path))

    @app.post("/api/index/trend", response_model=TrendResponse)
    def trend(req: TrendRequest):
        config = config_for(req.corpus, seed=req.seed, bandwidth=req.bandwidth)
        try:
            series = pipeline.load_index_series(config)
            points = series.column(req.column)
            fitted = index_mod.local_linear_trend(points, req.bandwidth)
        except (PipelineError, index_mod.IndexError_) as exc:
            raise ApiError(400, "trend_error", str(exc)) from exc
        path = config.corpus_dir / f"trend_{req.column}.csv"
        pipeline.write_artifact(path, index_mod.render_trend_csv(fitted), config)
        return TrendResponse(path=str(path), points=len(fitted))

    @app.post("/api/correlations", response_model=CorrelationResponse)
    def correlations(req: CorrelationRequest):
        table_path = req.table_path or str(pipeline.bundled_reference_path())
        pairs = None
        if req.pairs:
            pairs = [tuple(pair.split(":", 1)) for pair in req.pairs]
        try:
            rows = pipeline.correlation_table(table_path, pairs)
        except (PipelineError, index_mod.IndexError_, OSError, ValueError) as exc:
            raise ApiError(400, "correlation_error", str(exc)) from exc
        text, csv_text = pipeline.render_correlations(rows)
        config = config_for("default")
        pipeline.write_artifact(data_dir / "corr.txt", text, config)
        pipeline.write_artifact(data_dir / "corr.csv", csv_text, config)
        return CorrelationResponse(rows=[CorrelationRow(**r) for r in rows], table=text)

    @app.post("/api/sem/fit", response_model=SemFitResponse)
    def sem_fit(req: SemFitRequest):
        try:
            series = sem.read_panel_csv(req.panel_csv, req.sidecar)
            months = [d for s in series for d, _ in sem.to_monthly(s).observations]
            start = date.fromisoformat(req.start + "-01") if req.start else min(months)
            end = date.fromisoformat(req.end + "-01") if req.end else max(months)
            panel = sem.build_panel(series, start, end)
            if req.model_file:
                model = sem.parse_model(Path(req.model_file).read_text(encoding="utf-8"))
            else:
                model = sem.builtin_swb_model()
            fit = sem.fit_ml(model, panel.sample_covariance(), panel.n)
        except (sem.PanelError, sem.SemError, OSError) as exc:
            raise ApiError(400, "sem_error", str(exc)) from exc
        config = config_for("default")
        text_path = data_dir / "sem_fit.txt"
        json_path = data_dir / "sem_fit.json"
        report = fit.report_text()
        report += f"Dropped panel rows (listwise deletion): {panel.dropped_rows}\n"
        pipeline.write_artifact(text_path, report, config)
        json_path.write_text(fit.to_json() + "\n", encoding="utf-8")
        return SemFitResponse(
            report=report,
            n=fit.n,
            converged=fit.converged,
            dropped_rows=panel.dropped_rows,
            json_path=str(json_path),
            text_path=str(text_path),
        )

    @app.post("/api/report", response_model=ReportResponse)
    def report(req: ReportRequest):
        config = config_for(req.corpus, seed=req.seed)
        try:
            path = pipeline.assemble_report(config)
        except PipelineError as exc:
            raise ApiError(400, "report_error", str(exc)) from exc
        return ReportResponse(path=str(path))

    # -- annotation ------------------------------------------------------------

    @app.post("/api/sessions", response_model=SessionResponse)
    def open_session(req: SessionRequest):
        config = config_for(req.corpus)
        try:
            pool = pipeline.load_candidate_pool(config, req.dimension_pool)
            session = annotation.open_session(req.coder_id, pool, req.seed, app.state.labels)
        except EmptyPoolError as exc:
            raise ApiError(400, exc.code, str(exc)) from exc
        except (PipelineError, AnnotationError) as exc:
            raise ApiError(400, "session_error", str(exc)) from exc
        app.state.sessions[session.session_id] = session
        return SessionResponse(
            session_id=session.session_id, coder_id=session.coder_id, queue_length=len(session.queue)
        )

    def get_session(session_id: str) -> AnnotationSession:
        session = app.state.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session

    @app.get("/api/sessions/{session_id}/next", response_model=NextResponse)
    def next_post(session_id: str):
        session = get_session(session_id)
        post_id = session.current_post_id()
        return NextResponse(
            post_id=post_id,
            text=session.texts.get(post_id) if post_id else None,
            remaining=session.remaining,
        )

    @app.post("/api/sessions/{session_id}/labels", response_model=LabelsResponse)
    def submit(session_id: str, req: LabelsRequest):
        session = get_session(session_id)
        try:
            cursor = annotation.submit_labels(session, req.post_id, req.labels, app.state.labels)
        except StaleCursorError as exc:
            raise ApiError(409, exc.code, str(exc)) from exc
        except AnnotationError as exc:
            raise ApiError(400, exc.code, str(exc)) from exc
        return LabelsResponse(ok=True, cursor=cursor)

    @app.get("/api/progress", response_model=dict[str, int])
    def progress():
        return app.state.labels.progress()

    @app.get("/api/export/{dimension}", response_class=PlainTextResponse)
    def export(dimension: str):
        try:
            return annotation.export_jsonl(app.state.labels, dimension)
        except AnnotationError as exc:
            raise ApiError(400, exc.code, str(exc)) from exc

    # -- static coder UI ---------------------------------------------------------

    resolved_ui = ui_dir or os.environ.get("SWB_UI_DIR")
    if resolved_ui is None:
        default_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if default_ui.is_dir():
            resolved_ui = default_ui
    if resolved_ui and Path(resolved_ui).is_dir():
        app.mount("/", StaticFiles(directory=str(resolved_ui), html=True), name="ui")

    return app
