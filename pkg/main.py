import sys
from pathlib import Path

from dotenv import load_dotenv

# Add the parent directory to the Python path
sys.path.append(str(Path(__file__).parent))

from app.cli import main

# Load environment variables
load_dotenv()

if __name__ == "__main__":
    sys.exit(main())
