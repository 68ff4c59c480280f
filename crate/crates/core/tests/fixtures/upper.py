import json
import sys

for line in sys.stdin:
    line = line.strip()
    if line == "exit":
        break
    x = json.loads(line)["inputs"]["x"]
    print(json.dumps({"output": x.upper()}), flush=True)
