# core/managers/service_manager.py
from __future__ import annotations

from pathlib import Path
from typing import Optional

from core.errors import ConfigError
from core.llm_client import LLMGateway
from core.managers.config_manager import API_KEY_ENV, RunConfig
from core.models.geo import GeoPoint
from event_bus import EventBus
from providers import LLMBackend, RemoteChatBackend, ReplayBackend, ReplaySampler, ScriptedBackend
from services import (CohortService, DiaryReasonerService, EvaluationService, PatternService, PopulationService,
                      RunLogService, SpatialAnchorService, SurveyIngestService, SynthService)
from services.spatial_anchor_service import SpatialAnchor

TRANSCRIPTS_FILE = "transcripts.jsonl"
NETWORK_DIR = "network"


class ServiceManager:
    """
    Builds the backend, the gateway and every service from one RunConfig.
    Single responsibility: service lifecycle and dependency injection.
    """

    def __init__(self, event_bus: EventBus, config: RunConfig):
        self.event_bus = event_bus
        self.config = config
        self.binning = config.evaluation.binning()
        self.band_edges_m = tuple(config.reasoner.mode_distance_bands_m)
        self.sampler = ReplaySampler(self.binning, config.reasoner.cruise_speeds_kmh, self.band_edges_m)
        self.backend: Optional[LLMBackend] = None
        self.gateway: Optional[LLMGateway] = None
        self._anchor: Optional[SpatialAnchor] = None
        self._anchor_loaded = False

        self.run_log_service: Optional[RunLogService] = None
        self.survey_ingest_service: Optional[SurveyIngestService] = None
        self.synth_service: Optional[SynthService] = None
        self.spatial_anchor_service: Optional[SpatialAnchorService] = None
        self.cohort_service: Optional[CohortService] = None
        self.pattern_service: Optional[PatternService] = None
        self.population_service: Optional[PopulationService] = None
        self.diary_reasoner_service: Optional[DiaryReasonerService] = None
        self.evaluation_service: Optional[EvaluationService] = None

        self.log_to_event_bus("info", "[ServiceManager] Initialized")

    def log_to_event_bus(self, level: str, message: str):
        self.event_bus.emit("log_message_received", "ServiceManager", level, message)

    def build_backend(self) -> LLMBackend:
        cfg = self.config.backend
        if cfg.kind == "replay":
            return ReplayBackend(self.sampler, self.config.run_seed, self.config.cohort.gate_jsd_scale)
        if cfg.kind == "scripted":
            fixture_file = self.config.resolve(self.config.paths.fixture_file)
            if fixture_file is None:
                raise ConfigError("The scripted backend needs paths.fixture_file", keys=["paths.fixture_file"])
            return ScriptedBackend.from_file(fixture_file, strict=cfg.strict_fixtures)
        api_key = self.config.api_key()
        if not api_key:
            raise ConfigError(f"The remote backend needs an API key in ${API_KEY_ENV}", keys=["backend.kind"])
        return RemoteChatBackend(cfg.endpoint, cfg.model, api_key, max_retries=cfg.max_retries,
                                 backoff_base_s=cfg.backoff_base_s, timeout_s=cfg.timeout_s)

    def cache_path(self) -> Optional[Path]:
        if not self.config.backend.cache_enabled:
            return None
        configured = self.config.resolve(self.config.paths.cache_file)
        return configured or self.config.output_dir / TRANSCRIPTS_FILE

    def initialize_core_components(self):
        self.log_to_event_bus("info", "[ServiceManager] Initializing core components...")
        self.backend = self.build_backend()
        self.gateway = LLMGateway(self.backend, self.cache_path(), self.config.backend.max_in_flight)
        self.log_to_event_bus("info", f"[ServiceManager] Backend '{self.backend.backend_id}' ready")

    def initialize_services(self):
        """Initialize services with proper dependency order."""
        cfg = self.config
        self.log_to_event_bus("info", "[ServiceManager] Initializing services...")
        self.run_log_service = RunLogService(self.event_bus, cfg.output_dir)
        self.survey_ingest_service = SurveyIngestService(self.event_bus, cfg.reasoner.speed_caps_kmh)
        self.synth_service = SynthService(self.event_bus)
        self.spatial_anchor_service = SpatialAnchorService(self.event_bus, cfg.spatial.snap_radius_m,
                                                           cfg.spatial.strict_pois)
        self.cohort_service = CohortService(self.event_bus, self.gateway, cfg.cohort, self.binning,
                                            self.band_edges_m, cfg.backend.temperature_gate)
        self.pattern_service = PatternService(self.event_bus, self.gateway, cfg.patterns, cfg.ablation,
                                              self.binning, self.band_edges_m, cfg.run_seed,
                                              cfg.backend.temperature_generation, cfg.backend.max_tokens)
        self.population_service = PopulationService(self.event_bus, cfg.run_seed)
        self.evaluation_service = EvaluationService(self.event_bus, cfg.evaluation)
        self.log_to_event_bus("info", "[ServiceManager] Services initialized")

    def get_anchor(self) -> Optional[SpatialAnchor]:
        """The configured road network: CSV files, else a generated grid, else none."""
        if self._anchor_loaded:
            return self._anchor
        paths = self.config.paths
        files = [self.config.resolve(p) for p in (paths.network_nodes, paths.network_edges, paths.network_pois)]
        grid = self.config.spatial.grid
        if all(files):
            self._anchor = self.spatial_anchor_service.load_network(*files)
        elif any(files):
            raise ConfigError("network_nodes, network_edges and network_pois must be given together",
                              keys=["paths.network_nodes", "paths.network_edges", "paths.network_pois"])
        elif grid is not None:
            self._anchor = self.spatial_anchor_service.generate_grid_network(
                grid.rows, grid.cols, grid.spacing_m, GeoPoint(grid.origin_lat, grid.origin_lon),
                grid.pois_per_category, grid.seed, write_to=self.config.output_dir / NETWORK_DIR)
        else:
            self.log_to_event_bus("warning", "No road network configured; destinations are placed without one.")
        self._anchor_loaded = True
        return self._anchor

    def get_reasoner(self) -> DiaryReasonerService:
        if self.diary_reasoner_service is None:
            cfg = self.config
            self.diary_reasoner_service = DiaryReasonerService(
                self.event_bus, self.gateway, cfg.reasoner, cfg.ablation, self.sampler, cfg.run_seed,
                anchor=self.get_anchor(), temperature=cfg.backend.temperature_generation,
                max_tokens=cfg.backend.max_tokens, workers=cfg.workers,
            )
        return self.diary_reasoner_service

    async def shutdown(self):
        self.log_to_event_bus("info", "[ServiceManager] Shutting down services...")
        if self.gateway:
            await self.gateway.close()
        self.log_to_event_bus("info", "[ServiceManager] Services shutdown complete")

    def is_fully_initialized(self) -> bool:
        return all([self.gateway, self.cohort_service, self.pattern_service, self.evaluation_service])
