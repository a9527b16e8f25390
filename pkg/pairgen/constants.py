# Special tokens, in their fixed vocabulary-file order.
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
START_TOKEN = "<start>"
STOPS_TOKEN = "<stops>"
SPECIAL_TOKENS = [PAD_TOKEN, UNK_TOKEN, START_TOKEN, STOPS_TOKEN]

PAD_ID = 0
UNK_ID = 1
START_ID = 2
STOPS_ID = 3

# Rotation angles used by the self-supervised critic head, in label order.
ROTATION_ANGLES = (0, 90, 180, 270)

# Sentence-decoder gate states.
CONTINUE = 0
STOP = 1

# Exit codes shared by every command.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

MANIFEST_FILE_NAME = "manifest.jsonl"
DATASET_META_FILE_NAME = "dataset.json"
VOCAB_FILE_NAME = "vocab.txt"
CONFIG_ECHO_FILE_NAME = "config.json"
METRICS_LOG_FILE_NAME = "metrics.jsonl"

CHECKPOINT_FORMAT = "pairgen-checkpoint"
CHECKPOINT_VERSION = 1
