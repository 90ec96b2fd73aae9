# twin_server.py - HTTP front end of the twin store, plus fracture prediction
import logging
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np
import uvicorn
from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from errors import InvalidModel, PmiError, UntrainedModel
from ml import SavedModel, load_model, predict_proba
from settings import ServerSettings
from twin_model import model_document, parse_model
from twin_store import TwinStore

logger = logging.getLogger("pmi-dt.twin-server")


class CreateTwinRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_id: str
    properties: Dict[str, Any] = {}


class FailurePredictor:
    """Runs a saved tree/forest on a twin's current properties."""

    def __init__(self, saved: SavedModel):
        self.saved = saved

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "FailurePredictor":
        saved = load_model(path)
        logger.info(f"✅ Loaded {saved.kind} model with {len(saved.feature_names)} features from {path}")
        return cls(saved)

    def feature_vector(self, properties: Mapping[str, Any]):
        """Match features to properties case-insensitively; absent ones take the training mean."""
        by_name = {k.lower(): v for k, v in properties.items()}
        x, imputed = [], []
        for name, default in zip(self.saved.feature_names, self.saved.feature_defaults):
            value = by_name.get(name.lower())
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                x.append(float(value))
            else:
                x.append(default)
                imputed.append(name)
        return np.asarray(x), imputed

    def predict(self, properties: Mapping[str, Any]) -> Dict[str, Any]:
        x, imputed = self.feature_vector(properties)
        proba = predict_proba(self.saved.model, x)[0]
        label = int(np.argmax(proba))
        return {
            "fracture_probability": float(proba[1]) if len(proba) > 1 else 0.0,
            "predicted_label": label,
            "fracture": label == 1,
            "model": self.saved.kind,
            "imputed_features": imputed,
        }


class TwinServer:
    def __init__(self, store: TwinStore, predictor: Optional[FailurePredictor] = None):
        self.store = store
        self.predictor = predictor
        self.app = FastAPI(title="Bolt Digital Twin Store", lifespan=self._lifespan)
        self.setup_handlers()
        self.setup_routes()
        logger.info("🔩 Twin server initialized")

    @asynccontextmanager
    async def _lifespan(self, app: FastAPI):
        yield
        self.store.close()
        logger.info("✅ Event log flushed, twin server stopped")

    def setup_handlers(self):
        @self.app.exception_handler(PmiError)
        async def pmi_error(request: Request, exc: PmiError):
            if exc.http_status >= 500:
                logger.error(f"❌ {request.method} {request.url.path}: {exc.error_code} {exc.message}")
            return JSONResponse(status_code=exc.http_status, content=exc.to_dict())

        @self.app.exception_handler(RequestValidationError)
        async def bad_request(request: Request, exc: RequestValidationError):
            return JSONResponse(status_code=400,
                                content={"error_code": "InvalidRequest", "message": str(exc.errors())})

    def setup_routes(self):
        store = self.store

        @self.app.get("/")
        def root():
            return {
                "message": "Bolt Digital Twin Store",
                "status": "running",
                "twins": len(store.list_twins()),
                "predictor": self.predictor.saved.kind if self.predictor else None,
            }

        @self.app.get("/models")
        def list_models():
            return [model_document(m) for _, m in sorted(store.models.items())]

        @self.app.put("/models/{model_id}", status_code=201)
        async def put_model(model_id: str, request: Request):
            model = parse_model(await request.body())
            if model.model_id != model_id:
                raise InvalidModel(f"Path id {model_id} does not match document id {model.model_id}")
            store.register_model(model)
            return model_document(model)

        @self.app.get("/twins")
        def list_twins() -> List[str]:
            return store.list_twins()

        @self.app.put("/twins/{twin_id}", status_code=201)
        def put_twin(twin_id: str, body: CreateTwinRequest):
            return store.create_twin(twin_id, body.model_id, body.properties).model_dump()

        @self.app.patch("/twins/{twin_id}/properties")
        def patch_twin(twin_id: str, changes: Dict[str, Any] = Body(...)):
            return store.patch_properties(twin_id, changes).model_dump()

        @self.app.get("/twins/{twin_id}")
        def get_twin(twin_id: str):
            return store.get_twin(twin_id).model_dump()

        @self.app.get("/twins/{twin_id}/history")
        def get_history(twin_id: str):
            return [e.model_dump(mode="json") for e in store.history(twin_id)]

        @self.app.post("/twins/{twin_id}/predict")
        def predict(twin_id: str):
            twin = store.get_twin(twin_id)
            if self.predictor is None:
                raise UntrainedModel("The server was started without a trained model")
            result = self.predictor.predict(twin.properties)
            logger.info(f"🔮 {twin_id}: P(fracture)={result['fracture_probability']:.2f}")
            return {"twin_id": twin_id, "version": twin.version, **result}


def create_app(settings: Optional[ServerSettings] = None) -> FastAPI:
    """App factory; `uvicorn twin_server:create_app --factory` reads PMI_DT_* variables."""
    settings = settings or ServerSettings.from_env()
    store = TwinStore.open(settings.store_dir)
    predictor = FailurePredictor.from_file(settings.model_file) if settings.model_file else None
    return TwinServer(store, predictor).app


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    settings = ServerSettings.from_env()
    logger.info(f"🚀 Starting twin server on {settings.host}:{settings.port} (store: {settings.store_dir})")
    uvicorn.run(create_app(settings), host=settings.host, port=settings.port)
