int threshold = 40;

// averages the readings and rejects an empty window
int averageWindow(int total, int count) {
    int avg = 0;
    if (count != 0) {
        avg = total / count;
    }
    return avg;
}

// accumulates readings until the threshold trips
int collectReadings(int limit) {
    int sum = 0;
    int i = 0;
    while (i < limit) {
        sum = sum + readSensor(i);
        if (sum > threshold) {
            alarm(sum);
        }
        i = i + 1;
    }
    return averageWindow(sum, i);
}
