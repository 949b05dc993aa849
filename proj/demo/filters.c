// clamps a reading into the valid band
int clampReading(int value, int low, int high) {
    int out = value;
    if (out < low) {
        out = low;
    }
    if (out > high) {
        out = high;
    }
    return out;
}
