import os
from dotenv import load_dotenv

load_dotenv()
class Config:
    # Граф и солвер
    SIGMA = float(os.getenv("SPTRACK_SIGMA", "10"))
    LAMBDA1 = float(os.getenv("SPTRACK_LAMBDA1", "0.01"))
    LAMBDA2 = float(os.getenv("SPTRACK_LAMBDA2", "0.07"))
    ALPHA = float(os.getenv("SPTRACK_ALPHA", "0.001"))
    BETA = float(os.getenv("SPTRACK_BETA", "50"))
    MIN_ERROR = float(os.getenv("SPTRACK_MIN_ERROR", "1e-4"))
    MAX_ITER = int(os.getenv("SPTRACK_MAX_ITER", "100"))
    RIDGE = float(os.getenv("SPTRACK_RIDGE", "1e-8"))

    # Суперпиксели
    SUPERPIXELS = int(os.getenv("SPTRACK_SUPERPIXELS", "600"))
    COMPACTNESS = float(os.getenv("SPTRACK_COMPACTNESS", "10"))
    SLIC_ITERS = int(os.getenv("SPTRACK_SLIC_ITERS", "10"))
    MIN_SUPERPIXEL_SIZE = int(os.getenv("SPTRACK_MIN_SUPERPIXEL_SIZE", "8"))

    # Трекер
    REGION_EXPAND = float(os.getenv("SPTRACK_REGION_EXPAND", "1.5"))
    LOST_EXPAND = float(os.getenv("SPTRACK_LOST_EXPAND", "1.5"))
    MASK_THRESHOLD = float(os.getenv("SPTRACK_MASK_THRESHOLD", "0.5"))

    # Оптический поток (Horn-Schunck)
    FLOW_SMOOTHNESS = float(os.getenv("SPTRACK_FLOW_SMOOTHNESS", "15"))
    FLOW_ITERS = int(os.getenv("SPTRACK_FLOW_ITERS", "200"))
    FLOW_LEVELS = int(os.getenv("SPTRACK_FLOW_LEVELS", "3"))

    OUTPUT_DIR = os.getenv("SPTRACK_OUTPUT_DIR", "output")
    LOG_LEVEL = os.getenv("SPTRACK_LOG_LEVEL", "INFO")


core_config = Config()
