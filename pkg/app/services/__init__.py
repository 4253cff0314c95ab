import logging

logger = logging.getLogger(__name__)
logger.debug("Initializing services package")

from app.services.analytics import AnalyticsService
from app.services.audit_service import AuditService
from app.services.comparison_service import ComparisonService
from app.services.import_export import ImportExportService
from app.services.scenario_service import ScenarioService
from app.services.simulation_service import SimulationService
from app.services.suite_service import SuiteService
