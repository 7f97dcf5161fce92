from app.api.server import create_app
from dotenv import load_dotenv

# uvicorn main:app  -> soumission de configs et suivi des runs
load_dotenv()

app = create_app()
